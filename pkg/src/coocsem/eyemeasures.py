"""Per-trial reading-time measures on a target word.

Interest areas are word indices. Off-text fixations (``word_index`` of
``None``) are ignored. For a target at index ``T``:

* first pass: the first contiguous run of target fixations, provided no
  fixation right of ``T`` came earlier;
* FFD: first first-pass fixation; SFD: FFD when the first pass has
  exactly one fixation; GD: sum of the first pass;
* GPD: everything from first target entry up to (not including) the
  first fixation right of ``T``, regressions included;
* TVD: all target fixations in the trial.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Sequence, TextIO

import numpy as np

from .errors import StructuralError

logger = logging.getLogger(__name__)

MEASURES = ("sfd", "ffd", "gd", "tvd", "gpd")
DEFAULT_CUTOFFS = {"sfd": 800, "ffd": 800, "gd": 1000, "tvd": 1500, "gpd": 1500}
MIN_FIXATION_MS = 70
DEFAULT_REGIONS = {1: "verb", 3: "adjective", 4: "target"}
PRIME_ROLES = ("verb", "adjective")

TARGET_SKIPPED = "target-skipped"
PRIME_SKIPPED = "prime-skipped"
WRONG_EYE = "wrong-eye"


@dataclass(frozen=True)
class FixationEvent:
    onset: float
    duration: float
    word_index: int | None
    eye: str = "right"


@dataclass(frozen=True)
class TrialRecord:
    subject_id: str
    item_id: str
    condition: str
    fixations: tuple[FixationEvent, ...]
    regions: Mapping[int, str] = field(default_factory=lambda: dict(DEFAULT_REGIONS))

    def region_of(self, role: str) -> int:
        hits = [i for i, r in self.regions.items() if r == role]
        if len(hits) != 1:
            raise StructuralError(f"trial {self.subject_id}/{self.item_id}: "
                                  f"expected one {role} region, found {len(hits)}")
        return hits[0]

    @property
    def target(self) -> int:
        return self.region_of("target")


@dataclass(frozen=True)
class Validity:
    valid: bool
    reason: str | None = None


@dataclass(frozen=True)
class MeasureSet:
    ffd: float | None = None
    sfd: float | None = None
    gd: float | None = None
    tvd: float | None = None
    gpd: float | None = None
    skipped: bool = False
    valid: bool = True
    reason: str | None = None
    open_ended_gpd: bool = False
    dropped: tuple[str, ...] = ()

    def get(self, measure: str):
        return getattr(self, measure)


def check_structure(trial: TrialRecord) -> None:
    if not trial.fixations:
        raise StructuralError(f"trial {trial.subject_id}/{trial.item_id}: no fixation events")
    last_end = {}
    for f in trial.fixations:
        if f.duration <= 0:
            raise StructuralError(f"trial {trial.subject_id}/{trial.item_id}: non-positive duration at {f.onset}")
        prev = last_end.get(f.eye)
        if prev is not None and f.onset < prev:
            raise StructuralError(f"trial {trial.subject_id}/{trial.item_id}: "
                                  f"{f.eye}-eye fixation at {f.onset} overlaps or precedes the previous one")
        last_end[f.eye] = f.onset + f.duration
    for role in PRIME_ROLES + ("target",):
        trial.region_of(role)


def remove_short_fixations(trial: TrialRecord, min_ms: float = MIN_FIXATION_MS) -> TrialRecord:
    return replace(trial, fixations=tuple(f for f in trial.fixations if f.duration >= min_ms))


def _eye_sequence(trial: TrialRecord, eye: str) -> list[FixationEvent]:
    return [f for f in trial.fixations if f.eye == eye and f.word_index is not None]


def validate_trial(trial: TrialRecord, eye: str = "right") -> Validity:
    check_structure(trial)
    if not any(f.eye == eye for f in trial.fixations):
        return Validity(False, WRONG_EYE)
    seq = _eye_sequence(trial, eye)
    target = trial.target
    on_target = [f for f in seq if f.word_index == target]
    if not on_target:
        return Validity(False, TARGET_SKIPPED)
    first_onset = on_target[0].onset
    for role in PRIME_ROLES:
        region = trial.region_of(role)
        if not any(f.word_index == region and f.onset < first_onset for f in seq):
            return Validity(False, PRIME_SKIPPED)
    return Validity(True)


def compute_measures(trial: TrialRecord, eye: str = "right") -> MeasureSet:
    """All five measures for one trial; invalid trials get an empty set
    carrying the exclusion reason."""
    validity = validate_trial(trial, eye)
    if not validity.valid:
        return MeasureSet(valid=False, reason=validity.reason)
    seq = _eye_sequence(trial, eye)
    target = trial.target
    tvd = sum(f.duration for f in seq if f.word_index == target)
    t0 = next(i for i, f in enumerate(seq) if f.word_index == target)
    if any(f.word_index > target for f in seq[:t0]):
        return MeasureSet(tvd=tvd, skipped=True)
    end = t0
    while end < len(seq) and seq[end].word_index == target:
        end += 1
    ffd = seq[t0].duration
    gd = sum(f.duration for f in seq[t0:end])
    sfd = ffd if end - t0 == 1 else None
    exit_right = next((i for i in range(end, len(seq)) if seq[i].word_index > target), None)
    open_ended = exit_right is None
    gpd = sum(f.duration for f in seq[t0:len(seq) if open_ended else exit_right])
    return MeasureSet(ffd=ffd, sfd=sfd, gd=gd, tvd=tvd, gpd=gpd, open_ended_gpd=open_ended)


def apply_cutoffs(measures: MeasureSet, cutoffs: Mapping[str, float] = DEFAULT_CUTOFFS) -> MeasureSet:
    """Drop each measure independently when it exceeds its cutoff (strict >)."""
    changes = {}
    dropped = list(measures.dropped)
    for m, limit in cutoffs.items():
        v = measures.get(m)
        if v is not None and v > limit:
            changes[m] = None
            if m not in dropped:
                dropped.append(m)
    if not changes:
        return measures
    return replace(measures, dropped=tuple(dropped), **changes)


@dataclass(frozen=True)
class RemovalEntry:
    position: int
    cell: str
    value: float
    residual: float
    reason: str


@dataclass
class TrimResult:
    keep: list
    log: list

    def retained(self, values: Sequence[float]) -> list:
        return [v for v, k in zip(values, self.keep) if k]


def trim_outliers(values: Sequence[float], cells: Sequence[str], k: float = 2.5) -> TrimResult:
    """Single-pass removal of values whose cell-mean residual exceeds
    ``k`` residual SDs.

    ``values`` should already be log-transformed. Residuals are pooled
    over all cells for the SD. Cells with fewer than 3 values are passed
    through untrimmed and left out of the SD.
    """
    values = np.asarray(values, dtype=np.float64)
    cells = list(cells)
    if len(values) != len(cells):
        raise ValueError("values and cells differ in length")
    keep = [True] * len(values)
    log = []
    groups = {}
    for i, c in enumerate(cells):
        groups.setdefault(c, []).append(i)
    residuals = np.full(len(values), np.nan)
    for c, idx in groups.items():
        if len(idx) < 3:
            logger.warning("cell %s has %d values; passed through untrimmed", c, len(idx))
            continue
        residuals[idx] = values[idx] - values[idx].mean()
    eligible = residuals[~np.isnan(residuals)]
    if len(eligible) < 2:
        return TrimResult(keep, log)
    sd = float(np.std(eligible, ddof=1))
    if sd == 0.0:
        return TrimResult(keep, log)
    limit = k * sd
    for i, r in enumerate(residuals):
        if not np.isnan(r) and abs(r) > limit:
            keep[i] = False
            log.append(RemovalEntry(i, cells[i], float(values[i]), float(r), f"|residual| > {k} SD"))
    return TrimResult(keep, log)


# -- TSV interfaces -----------------------------------------------------------

FIXATION_COLUMNS = ("subject_id", "item_id", "condition", "word_index", "onset_ms", "duration_ms", "eye")
MEASURE_COLUMNS = ("subject_id", "item_id", "condition", "measure", "value", "status")
_OFF_TEXT = {"", ".", "NA", "-1", "off"}


def _num(text: str):
    x = float(text)
    return int(x) if x.is_integer() else x


def read_regions_tsv(fh: TextIO) -> dict:
    """item_id, word_index, role -> {item_id: {word_index: role}}"""
    header = fh.readline().rstrip("\n").split("\t")
    out = {}
    for line in fh:
        if not line.strip():
            continue
        row = dict(zip(header, line.rstrip("\n").split("\t")))
        out.setdefault(row["item_id"], {})[int(row["word_index"])] = row["role"]
    return out


def read_fixations_tsv(fh: TextIO, regions: Mapping[str, Mapping[int, str]] | None = None) -> list[TrialRecord]:
    header = fh.readline().rstrip("\n").split("\t")
    missing = [c for c in FIXATION_COLUMNS if c not in header]
    if missing:
        raise ValueError(f"fixation TSV lacks columns: {missing}")
    trials = {}
    for line in fh:
        if not line.strip():
            continue
        row = dict(zip(header, line.rstrip("\n").split("\t")))
        key = (row["subject_id"], row["item_id"])
        wi = row["word_index"].strip()
        event = FixationEvent(_num(row["onset_ms"]), _num(row["duration_ms"]),
                              None if wi in _OFF_TEXT else int(wi), row["eye"].strip().lower())
        if key not in trials:
            trials[key] = (row["condition"], [])
        trials[key][1].append(event)
    out = []
    for (subject, item), (cond, events) in trials.items():
        reg = (regions or {}).get(item, DEFAULT_REGIONS)
        out.append(TrialRecord(subject, item, cond, tuple(events), dict(reg)))
    return out


def measure_status(ms: MeasureSet, measure: str) -> str:
    if not ms.valid:
        return ms.reason
    if ms.get(measure) is not None:
        return "open-ended" if measure == "gpd" and ms.open_ended_gpd else "ok"
    if measure in ms.dropped:
        return "cutoff"
    if ms.skipped:
        return "first-pass-skipped"
    if measure == "sfd":
        return "refixated"
    return "absent"


def _fmt_ms(v) -> str:
    if v is None:
        return ""
    v = float(v)
    return str(int(v)) if v.is_integer() else format(v, ".10g")


def reduce_trials(trials: Iterable[TrialRecord], *, eye: str = "right",
                  min_fixation_ms: float = MIN_FIXATION_MS,
                  cutoffs: Mapping[str, float] = DEFAULT_CUTOFFS) -> list:
    """Short-fixation removal, validation, measures and cutoffs for every
    trial. Returns ``(trial, MeasureSet)`` pairs; structurally broken trials
    get a MeasureSet with reason ``structural-error``."""
    out = []
    for trial in trials:
        cleaned = remove_short_fixations(trial, min_fixation_ms)
        try:
            ms = apply_cutoffs(compute_measures(cleaned, eye), cutoffs)
        except StructuralError as exc:
            logger.warning("%s", exc)
            ms = MeasureSet(valid=False, reason="structural-error")
        out.append((trial, ms))
    return out


def write_measures_tsv(reduced: Iterable, fh: TextIO) -> None:
    fh.write("\t".join(MEASURE_COLUMNS) + "\n")
    for trial, ms in reduced:
        for m in MEASURES:
            fh.write(f"{trial.subject_id}\t{trial.item_id}\t{trial.condition}\t{m}\t"
                     f"{_fmt_ms(ms.get(m))}\t{measure_status(ms, m)}\n")


def read_measures_tsv(fh: TextIO) -> list[dict]:
    header = fh.readline().rstrip("\n").split("\t")
    rows = []
    for line in fh:
        if not line.strip():
            continue
        row = dict(zip(header, line.rstrip("\n").split("\t")))
        row["value"] = float(row["value"]) if row.get("value") else None
        rows.append(row)
    return rows
