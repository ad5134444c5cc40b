import io

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import special, stats

from coocsem.analysis import (TERMS, analyze_measure, contrast_codes, design_matrix, fit_by_subject,
                              fit_contrasts, fit_ols, kolmogorov_sf, ks_normality, summarize_cells,
                              write_fit_tsv, write_summary_tsv)
from coocsem.errors import InsufficientDataError, SingularDesignError

CONDS = ("HH", "HL", "LH", "LL")


def test_cell_summaries():
    s = {x.condition: x for x in summarize_cells({"HH": [235, 235, 235], "HL": [200, 300], "LH": [], "LL": [250]})}
    assert (s["HH"].mean, s["HH"].se) == (235.0, 0.0)
    assert (s["HL"].mean, s["HL"].se) == (250.0, 50.0)
    assert (s["LH"].n, s["LH"].mean, s["LH"].se) == (0, None, None)
    assert (s["LL"].n, s["LL"].se) == (1, None)


def test_contrast_coding():
    assert contrast_codes("HL") == (0.5, -0.5)
    X = design_matrix(CONDS)
    assert X.tolist() == [[1, .5, .5, .25], [1, .5, -.5, -.25], [1, -.5, .5, -.25], [1, -.5, -.5, .25]]
    # balanced design: columns are mutually orthogonal
    G = X.T @ X
    assert np.allclose(G - np.diag(np.diag(G)), 0)
    with pytest.raises(ValueError):
        contrast_codes("HM")


def test_constant_response_is_degenerate():
    fit = fit_contrasts([np.log(235.0)] * 8, CONDS * 2)
    assert fit.degenerate
    assert fit.coef("intercept")[0] == pytest.approx(np.log(235.0), abs=1e-12)
    for term in TERMS[1:]:
        b, se, t = fit.coef(term)
        assert abs(b) < 1e-12 and se == 0 and t == 0


def test_normal_equations_small():
    y = np.log([230, 250, 210, 260, 245, 228, 220, 270])
    conds = ["HH", "HL", "LH", "LL", "HH", "HL", "LH", "LL"]
    X = design_matrix(conds)
    b_ref = np.linalg.solve(X.T @ X, X.T @ y)
    resid = y - X @ b_ref
    s2 = resid @ resid / (8 - 4)
    se_ref = np.sqrt(s2 * np.diag(np.linalg.inv(X.T @ X)))
    fit = fit_contrasts(y, conds)
    assert np.allclose(fit.b, b_ref, atol=1e-10, rtol=0)
    assert np.allclose(fit.se, se_ref, atol=1e-10, rtol=0)
    assert np.allclose(fit.t, b_ref / se_ref, atol=1e-8, rtol=0)
    assert fit.df == 4


def test_main_effect_is_difference_of_means():
    rng = np.random.default_rng(2)
    conds = [c for c in CONDS for _ in range(25)]
    y = rng.normal(5.4, 0.3, len(conds))
    fit = fit_contrasts(y, conds)
    m = {c: y[[i for i, x in enumerate(conds) if x == c]].mean() for c in CONDS}
    verb = (m["HH"] + m["HL"]) / 2 - (m["LH"] + m["LL"]) / 2
    adj = (m["HH"] + m["LH"]) / 2 - (m["HL"] + m["LL"]) / 2
    inter = (m["HH"] - m["HL"]) - (m["LH"] - m["LL"])
    assert fit.coef("ca_verb")[0] == pytest.approx(verb, abs=1e-12)
    assert fit.coef("ca_adjective")[0] == pytest.approx(adj, abs=1e-12)
    assert fit.coef("ca_verb:ca_adjective")[0] == pytest.approx(inter, abs=1e-12)
    assert fit.coef("intercept")[0] == pytest.approx(np.mean(list(m.values())), abs=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.001, 1000))
def test_scale_invariance(seed, scale):
    rng = np.random.default_rng(seed)
    conds = [c for c in CONDS for _ in range(6)]
    ms = rng.lognormal(5.4, 0.3, len(conds))
    a = fit_contrasts(np.log(ms), conds)
    b = fit_contrasts(np.log(ms * scale), conds)
    assert np.allclose(a.b[1:], b.b[1:], atol=1e-9)
    assert np.allclose(a.se, b.se, rtol=1e-7)
    assert np.allclose(a.t[1:], b.t[1:], rtol=1e-6, atol=1e-7)


def test_fit_errors():
    with pytest.raises(InsufficientDataError):
        fit_contrasts([1.0, 2.0, 3.0, 4.0], CONDS)
    with pytest.raises(SingularDesignError):
        fit_contrasts([1.0, 2.0, 3.0, 4.0, 5.0, 6.0], ["HH", "HL"] * 3)


def test_by_subject_fit_uses_cell_means():
    rng = np.random.default_rng(4)
    subj = [f"s{s}" for s in range(6) for _ in range(8)]
    conds = [c for _ in range(6) for c in CONDS * 2]
    y = rng.normal(5, 0.2, len(subj))
    fit = fit_by_subject(y, conds, subj)
    assert fit.n == 24
    means = [np.mean([y[i] for i in range(len(y)) if subj[i] == s and conds[i] == c])
             for s in sorted(set(subj)) for c in CONDS]
    ref = fit_ols(means, design_matrix([c for _ in range(6) for c in CONDS]))
    assert np.allclose(fit.b, ref.b)


# -- KS ------------------------------------------------------------------------------

@pytest.mark.parametrize("lam", [0.2, 0.5, 0.8, 1.0, 1.36, 2.0, 3.0])
def test_kolmogorov_series(lam):
    assert kolmogorov_sf(lam) == pytest.approx(special.kolmogorov(lam), abs=1e-9)


def test_ks_against_scipy():
    rng = np.random.default_rng(11)
    for dist in (rng.normal(0, 1, 200), rng.exponential(1, 150), rng.uniform(0, 1, 60)):
        r = ks_normality(dist)
        ref = stats.kstest(dist, "norm", args=(dist.mean(), dist.std(ddof=1)))
        assert r.d == pytest.approx(ref.statistic, abs=1e-12)
        assert r.p == pytest.approx(special.kolmogorov(np.sqrt(len(dist)) * r.d), abs=1e-9)


def test_ks_quantile_grid_is_normal():
    x = stats.norm.ppf((np.arange(1, 201) - 0.5) / 200)
    r = ks_normality(x)
    assert r.d < 0.02 and r.p > 0.99


def test_ks_rejects_uniform():
    x = np.random.default_rng(0).uniform(0, 1, 1000)
    assert ks_normality(x).p < 0.01


def test_ks_small_or_constant():
    with pytest.raises(InsufficientDataError):
        ks_normality([1.0, 2.0, 3.0, 4.0])
    with pytest.raises(InsufficientDataError):
        ks_normality([2.0] * 10)


# -- whole-measure pipeline ----------------------------------------------------------

def test_analyze_measure_and_tsv():
    rng = np.random.default_rng(8)
    conds = [c for c in CONDS for _ in range(40)]
    ms = list(np.exp(rng.normal(5.4, 0.3, len(conds))))
    ms[0] = 50_000.0
    res = analyze_measure("ffd", ms, conds)
    assert res.n_rows == 159 and res.removed[0].position == 0
    assert res.fit is not None and res.ks is not None
    s, f = io.StringIO(), io.StringIO()
    write_summary_tsv([res], s)
    write_fit_tsv([res], f)
    assert s.getvalue().splitlines()[0] == "measure\tcondition\tn\tmean\tse"
    assert s.getvalue().splitlines()[1].startswith("ffd\tHH\t39\t")
    assert len(f.getvalue().splitlines()) == 5
