"""Cell summaries, 2x2 contrast regression on log durations, and a
Kolmogorov-Smirnov normality check.

Contrasts use successive-differences coding for two levels: low = -0.5,
high = +0.5, so a main-effect coefficient is mean(high) - mean(low) and a
facilitation by high overlap shows up as a negative B. The interaction
column is the product of the two main-effect columns.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence, TextIO

import numpy as np

from .errors import InsufficientDataError, SingularDesignError
from .eyemeasures import trim_outliers

TERMS = ("intercept", "ca_verb", "ca_adjective", "ca_verb:ca_adjective")
CONDITION_ORDER = ("HH", "HL", "LH", "LL")


@dataclass(frozen=True)
class CellSummary:
    condition: str
    n: int
    mean: float | None
    se: float | None


def summarize_cells(values_by_cell: Mapping[str, Sequence[float]]) -> list[CellSummary]:
    """Mean and SE (= SD / sqrt(n), sample SD) per condition, on the raw scale."""
    order = [c for c in CONDITION_ORDER if c in values_by_cell]
    order += sorted(c for c in values_by_cell if c not in CONDITION_ORDER)
    out = []
    for c in order:
        v = np.asarray(values_by_cell[c], dtype=np.float64)
        if len(v) == 0:
            out.append(CellSummary(c, 0, None, None))
            continue
        se = float(np.std(v, ddof=1) / math.sqrt(len(v))) if len(v) > 1 else None
        out.append(CellSummary(c, len(v), float(v.mean()), se))
    return out


def contrast_codes(condition: str) -> tuple[float, float]:
    """(verb, adjective) codes for an HH/HL/LH/LL label; High = +0.5."""
    if len(condition) != 2 or any(ch not in "HL" for ch in condition):
        raise ValueError(f"not a 2x2 condition label: {condition!r}")
    return tuple(0.5 if ch == "H" else -0.5 for ch in condition)


def design_matrix(conditions: Sequence[str]) -> np.ndarray:
    codes = np.array([contrast_codes(c) for c in conditions], dtype=np.float64).reshape(-1, 2)
    verb, adj = codes[:, 0], codes[:, 1]
    return np.column_stack([np.ones(len(codes)), verb, adj, verb * adj])


@dataclass
class FitResult:
    terms: tuple
    b: np.ndarray
    se: np.ndarray
    t: np.ndarray
    sigma2: float
    df: int
    n: int
    residuals: np.ndarray
    degenerate: bool = False

    def coef(self, term: str) -> tuple[float, float, float]:
        i = self.terms.index(term)
        return float(self.b[i]), float(self.se[i]), float(self.t[i])


def fit_ols(y: Sequence[float], X: np.ndarray, terms: Sequence[str] = TERMS) -> FitResult:
    y = np.asarray(y, dtype=np.float64)
    X = np.asarray(X, dtype=np.float64)
    n, p = X.shape
    if n < 5 or n <= p:
        raise InsufficientDataError(f"{n} observations for {p} coefficients")
    q, r = np.linalg.qr(X)
    diag = np.abs(np.diag(r))
    if diag.min() <= 1e-10 * diag.max():
        raise SingularDesignError("design columns are collinear")
    b = np.linalg.solve(r, q.T @ y)
    resid = y - X @ b
    df = n - p
    sigma2 = float(resid @ resid / df)
    scale = max(1.0, float(np.abs(y).max()))
    if sigma2 <= (1e-12 * scale) ** 2:
        zeros = np.zeros(p)
        return FitResult(tuple(terms), b, zeros, zeros.copy(), 0.0, df, n, resid, degenerate=True)
    r_inv = np.linalg.solve(r, np.eye(p))
    se = np.sqrt(sigma2 * np.einsum("ij,ij->i", r_inv, r_inv))
    return FitResult(tuple(terms), b, se, b / se, sigma2, df, n, resid)


def fit_contrasts(log_values: Sequence[float], conditions: Sequence[str]) -> FitResult:
    """OLS of log durations on intercept, verb-CA, adjective-CA and their
    interaction, with classical standard errors and t = B / SE."""
    if len(log_values) != len(conditions):
        raise ValueError("log_values and conditions differ in length")
    return fit_ols(log_values, design_matrix(conditions))


def fit_by_subject(log_values: Sequence[float], conditions: Sequence[str],
                   subjects: Sequence[str]) -> FitResult:
    """Same contrasts fitted to one mean log value per subject and cell."""
    cells = {}
    for v, c, s in zip(log_values, conditions, subjects):
        cells.setdefault((s, c), []).append(v)
    keys = sorted(cells)
    return fit_contrasts([float(np.mean(cells[k])) for k in keys], [c for _, c in keys])


@dataclass(frozen=True)
class KSResult:
    d: float
    p: float
    n: int


def kolmogorov_sf(lam: float, tol: float = 1e-10) -> float:
    """P(K > lam) for the Kolmogorov distribution, by its alternating series."""
    if lam <= 0.0:
        return 1.0
    total, k = 0.0, 1
    while True:
        term = math.exp(-2.0 * k * k * lam * lam)
        total += term if k % 2 else -term
        if term < tol:
            break
        k += 1
    return min(1.0, max(0.0, 2.0 * total))


def ks_normality(residuals: Sequence[float]) -> KSResult:
    """One-sample KS test against a normal with the sample mean and SD.

    The p-value is asymptotic (sqrt(n) * D into the Kolmogorov
    distribution), without the Lilliefors correction for estimated
    parameters.
    """
    x = np.sort(np.asarray(residuals, dtype=np.float64))
    n = len(x)
    if n < 5:
        raise InsufficientDataError(f"KS test needs at least 5 values, got {n}")
    sd = float(np.std(x, ddof=1))
    if sd == 0.0:
        raise InsufficientDataError("KS test undefined for zero-variance data")
    z = (x - x.mean()) / sd
    cdf = np.array([0.5 * (1.0 + math.erf(v / math.sqrt(2.0))) for v in z])
    i = np.arange(1, n + 1)
    d = float(max((i / n - cdf).max(), (cdf - (i - 1) / n).max()))
    return KSResult(d, kolmogorov_sf(math.sqrt(n) * d), n)


@dataclass
class MeasureAnalysis:
    measure: str
    summaries: list
    fit: FitResult | None
    ks: KSResult | None
    n_rows: int
    removed: list


def analyze_measure(measure: str, values: Sequence[float], conditions: Sequence[str],
                    subjects: Sequence[str] | None = None, *, trim_k: float = 2.5,
                    by_subject: bool = False) -> MeasureAnalysis:
    """Log-transform, trim, summarize (raw ms) and fit one measure."""
    values = np.asarray(values, dtype=np.float64)
    logs = np.log(values)
    trim = trim_outliers(logs, conditions, trim_k)
    keep = np.array(trim.keep, dtype=bool)
    kept_conds = [c for c, k in zip(conditions, keep) if k]
    by_cell = {c: [] for c in CONDITION_ORDER}
    for v, c in zip(values[keep], kept_conds):
        by_cell.setdefault(c, []).append(float(v))
    fit = ks = None
    try:
        if by_subject:
            kept_subj = [s for s, k in zip(subjects, keep) if k]
            fit = fit_by_subject(logs[keep], kept_conds, kept_subj)
        else:
            fit = fit_contrasts(logs[keep], kept_conds)
        if not fit.degenerate:
            ks = ks_normality(fit.residuals)
    except (InsufficientDataError, SingularDesignError):
        pass
    return MeasureAnalysis(measure, summarize_cells(by_cell), fit, ks, int(keep.sum()), trim.log)


def write_summary_tsv(results: Iterable[MeasureAnalysis], fh: TextIO) -> None:
    fh.write("measure\tcondition\tn\tmean\tse\n")
    for r in results:
        for s in r.summaries:
            mean = "" if s.mean is None else f"{s.mean:.2f}"
            se = "" if s.se is None else f"{s.se:.2f}"
            fh.write(f"{r.measure}\t{s.condition}\t{s.n}\t{mean}\t{se}\n")


def write_fit_tsv(results: Iterable[MeasureAnalysis], fh: TextIO) -> None:
    fh.write("measure\tn_rows\tterm\tB\tSE\tt\tks_d\tks_p\n")
    for r in results:
        if r.fit is None:
            continue
        ks_d = "" if r.ks is None else f"{r.ks.d:.4f}"
        ks_p = "" if r.ks is None else f"{r.ks.p:.4f}"
        for term in r.fit.terms:
            b, se, t = r.fit.coef(term)
            fh.write(f"{r.measure}\t{r.n_rows}\t{term}\t{b:.4f}\t{se:.4f}\t{t:.2f}\t{ks_d}\t{ks_p}\n")
