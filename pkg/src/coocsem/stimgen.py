"""Stimulus annotation, 2x2 condition assignment, balanced set selection
and pseudorandomized presentation lists.

Sentence frames have the shape pronoun, verb, article, adjective, noun,
followed by at least three closed-class words. The verb and adjective are
the primes, the noun is the target. Items are assigned to HH/HL/LH/LL by
the CA bands of verb-noun and adjective-noun.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Sequence, TextIO

import numpy as np

from .assoc import HIGH, LOW, AssociateStore, CABands, common_associates
from .cooc import AssociationConfig, PairStats, association_strength, fmt_float
from .corpus import CorpusIndex
from .errors import (AnnotationError, CoocsemError, InfeasibleSelectionError,
                     ListConstraintError)
from .lexstats import Lexicon, profile

logger = logging.getLogger(__name__)

CONDITIONS = ("HH", "HL", "LH", "LL")
FILLER = "filler"
LABELS = {(HIGH, HIGH): "HH", (HIGH, LOW): "HL", (LOW, HIGH): "LH", (LOW, LOW): "LL"}

PRIME_SLOTS = ("verb", "adjective")
OPEN_SLOTS = ("verb", "adjective", "noun")
CLOSED_SLOTS = ("closed1", "closed2", "closed3")
SLOTS = OPEN_SLOTS + CLOSED_SLOTS
EXPECTED_POSITIONS = {"verb": 1, "adjective": 3, "noun": 4, "closed1": 5, "closed2": 6, "closed3": 7}

MANIPULATED = ("ca_verb_noun", "ca_adj_noun")
CONTROL_VARIABLES = (
    "as_verb_noun", "as_adj_noun", "as_verb_adj", "ca_verb_adj",
    "noun_length", "noun_freq_class", "noun_on",
    "verb_length", "verb_freq_class", "verb_on",
    "adjective_length", "adjective_freq_class", "adjective_on",
    "closed1_length", "closed1_freq_class",
    "closed2_length", "closed2_freq_class",
    "closed3_length", "closed3_freq_class",
)
FEATURES = MANIPULATED + CONTROL_VARIABLES

_TRAILING_PUNCT = ",.;:!?\"'»«“”„)("


@dataclass(frozen=True)
class RawItem:
    """A user-authored sentence frame with slot positions.

    ``lemmas`` maps slot names to the corpus lookup form; slots without an
    entry use the surface token stripped of punctuation.
    """

    item_id: str
    sentence: str
    slots: Mapping[str, int] = field(default_factory=lambda: dict(EXPECTED_POSITIONS))
    lemmas: Mapping[str, str] = field(default_factory=dict)

    @property
    def tokens(self) -> list[str]:
        return self.sentence.split()

    def surface(self, slot: str) -> str:
        return self.tokens[self.slots[slot]].strip(_TRAILING_PUNCT)

    def lemma(self, slot: str) -> str:
        return self.lemmas.get(slot) or self.surface(slot)

    @property
    def comma_after_target(self) -> bool:
        return self.tokens[self.slots["noun"]].endswith(",")


@dataclass(frozen=True)
class StimulusItem:
    item_id: str
    sentence: str
    lemmas: Mapping[str, str]
    features: Mapping[str, float]
    comma_after_target: bool = False
    condition: str | None = None


@dataclass
class Engines:
    """Bundle of the corpus-derived resources used for annotation."""

    index: CorpusIndex
    pair_stats: PairStats
    store: AssociateStore
    lexicon: Lexicon
    assoc_config: AssociationConfig = AssociationConfig()
    bands: CABands = CABands()


def validate_frame(raw: RawItem, check_length: bool = False) -> None:
    tokens = raw.tokens
    for slot in SLOTS:
        pos = raw.slots.get(slot)
        if pos != EXPECTED_POSITIONS[slot]:
            raise AnnotationError(raw.item_id, slot, None,
                                  f"expected position {EXPECTED_POSITIONS[slot]}, got {pos}")
        if pos >= len(tokens):
            raise AnnotationError(raw.item_id, slot, None, "position beyond sentence end")
    if check_length:
        if not 69 <= len(raw.sentence) <= 72:
            raise AnnotationError(raw.item_id, "sentence", raw.sentence,
                                  f"{len(raw.sentence)} characters, need 69-72")
        if not 9 <= len(tokens) <= 14:
            raise AnnotationError(raw.item_id, "sentence", raw.sentence,
                                  f"{len(tokens)} words, need 9-14")


def annotate(raw: RawItem, engines: Engines, check_length: bool = False) -> StimulusItem:
    validate_frame(raw, check_length)
    lemmas = {slot: raw.lemma(slot) for slot in SLOTS}
    for slot, word in lemmas.items():
        if word not in engines.index:
            raise AnnotationError(raw.item_id, slot, word, "not in corpus vocabulary")

    def pair_features(s1, s2):
        try:
            ca = common_associates(lemmas[s1], lemmas[s2], engines.store, engines.bands).ca_count
            as_value = association_strength(lemmas[s1], lemmas[s2], engines.pair_stats,
                                            engines.assoc_config).as_value
        except CoocsemError as exc:
            raise AnnotationError(raw.item_id, s1, lemmas[s1], str(exc)) from exc
        return ca, as_value

    f = {}
    f["ca_verb_noun"], f["as_verb_noun"] = pair_features("verb", "noun")
    f["ca_adj_noun"], f["as_adj_noun"] = pair_features("adjective", "noun")
    f["ca_verb_adj"], f["as_verb_adj"] = pair_features("verb", "adjective")
    for slot in SLOTS:
        p = profile(lemmas[slot], engines.index, engines.lexicon)
        f[f"{slot}_length"] = p.length
        f[f"{slot}_freq_class"] = p.freq_class
        if slot in OPEN_SLOTS:
            f[f"{slot}_on"] = p.on_count
    features = {k: f[k] for k in FEATURES}
    return StimulusItem(raw.item_id, raw.sentence, lemmas, features, raw.comma_after_target)


@dataclass(frozen=True)
class Assignment:
    label: str | None
    reason: str | None = None

    @property
    def accepted(self) -> bool:
        return self.label is not None


def assign_condition(item: StimulusItem, bands: CABands = CABands(), *,
                     require_zero_prime_as: bool = True, prime_as_tolerance: float = 0.0) -> Assignment:
    verb_band = bands.band(item.features["ca_verb_noun"])
    adj_band = bands.band(item.features["ca_adj_noun"])
    label = LABELS.get((verb_band, adj_band))
    if label is None:
        return Assignment(None, "mid-band")
    if require_zero_prime_as and item.features["as_verb_adj"] > prime_as_tolerance:
        return Assignment(None, "prime-association")
    return Assignment(label)


def anova_f(groups: Sequence[Sequence[float]]) -> float:
    """One-way between-groups F = MS_between / MS_within.

    Returns ``inf`` when the groups differ but have no internal variance,
    and 0 when all values are identical.
    """
    arrays = [np.asarray(g, dtype=np.float64) for g in groups]
    if len(arrays) < 2 or any(len(a) < 2 for a in arrays):
        raise ValueError("need at least 2 groups with at least 2 values each")
    n_total = sum(len(a) for a in arrays)
    grand = np.concatenate(arrays).mean()
    ss_between = sum(len(a) * (a.mean() - grand) ** 2 for a in arrays)
    ss_within = sum(((a - a.mean()) ** 2).sum() for a in arrays)
    df_between = len(arrays) - 1
    df_within = n_total - len(arrays)
    if ss_within == 0.0:
        return math.inf if ss_between > 0.0 else 0.0
    return float((ss_between / df_between) / (ss_within / df_within))


@dataclass
class BalanceReport:
    variables: tuple[str, ...]
    controls: tuple[str, ...]
    f: dict
    means: dict
    sds: dict
    passed: bool
    offending: list

    @property
    def max_f(self) -> float:
        return max((self.f[v] for v in self.controls), default=0.0)


def balance_report(cells: Mapping[str, Sequence[StimulusItem]],
                   controls: Sequence[str] = CONTROL_VARIABLES) -> BalanceReport:
    variables = tuple(v for v in MANIPULATED if v not in controls) + tuple(controls)
    f, means, sds = {}, {}, {}
    for v in variables:
        groups = [[it.features[v] for it in cells[c]] for c in CONDITIONS]
        means[v] = {c: float(np.mean(g)) for c, g in zip(CONDITIONS, groups)}
        sds[v] = {c: float(np.std(g, ddof=1)) if len(g) > 1 else 0.0 for c, g in zip(CONDITIONS, groups)}
        f[v] = anova_f(groups) if all(len(g) > 1 for g in groups) else 0.0
    offending = [v for v in controls if not f[v] < 1.0]
    return BalanceReport(variables, tuple(controls), f, means, sds, not offending, offending)


@dataclass
class Selection:
    cells: dict
    report: BalanceReport
    restart: int

    @property
    def items(self) -> list[StimulusItem]:
        return [it for c in CONDITIONS for it in self.cells[c]]


def _f_from_sums(sums, sumsq, n_per_cell):
    # sums, sumsq: (cells, controls); equal cell sizes
    g = sums.shape[0]
    n_total = g * n_per_cell
    total = sums.sum(axis=0)
    ss_between = (sums ** 2).sum(axis=0) / n_per_cell - total ** 2 / n_total
    ss_within = sumsq.sum(axis=0) - (sums ** 2).sum(axis=0) / n_per_cell
    ss_between = np.maximum(ss_between, 0.0)
    tiny = 1e-12 * np.maximum(sumsq.sum(axis=0), 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        f = (ss_between / (g - 1)) / (ss_within / (n_total - g))
    f = np.where(ss_within > tiny, f, np.where(ss_between > tiny, np.inf, 0.0))
    return f


def _objective(f):
    return (float(f.max()), float(f.sum()))


def select_set(pool: Iterable[StimulusItem], n_per_cell: int = 40,
               controls: Sequence[str] = CONTROL_VARIABLES, *, max_iters: int = 20000,
               restarts: int = 8, seed: int = 0, comma_balance: bool = False,
               stop_below: float = 0.9) -> Selection:
    """Pick ``n_per_cell`` items per condition with balanced controls.

    Each restart draws a stratified random start and hill-climbs with
    within-cell swaps, minimizing the largest control F (then the sum of
    Fs). A restart stops early once every F is below ``stop_below``. The
    best restart wins (lowest max F, ties to the lower restart number).
    If no restart reaches all F < 1 the best set is returned with
    ``report.passed`` false and the offending variables listed.
    """
    controls = tuple(controls)
    by_cell = {c: [] for c in CONDITIONS}
    for it in pool:
        if it.condition in by_cell:
            by_cell[it.condition].append(it)
    if comma_balance and n_per_cell % 2:
        raise InfeasibleSelectionError("comma balance needs an even number of items per cell")

    strata = {}
    for c in CONDITIONS:
        items = by_cell[c]
        if comma_balance:
            groups = [[i for i, it in enumerate(items) if it.comma_after_target],
                      [i for i, it in enumerate(items) if not it.comma_after_target]]
            need = [n_per_cell // 2, n_per_cell // 2]
        else:
            groups, need = [list(range(len(items)))], [n_per_cell]
        for g, k in zip(groups, need):
            if len(g) < k:
                raise InfeasibleSelectionError(
                    f"cell {c}: {len(g)} candidates available, {k} required"
                    + (" (comma stratum)" if comma_balance else ""))
        strata[c] = list(zip(groups, need))

    # Center by pool means to limit cancellation in the running sums.
    all_items = [it for c in CONDITIONS for it in by_cell[c]]
    center = np.array([np.mean([it.features[v] for it in all_items]) for v in controls]) if controls else np.zeros(0)
    X = {c: np.array([[it.features[v] for v in controls] for it in by_cell[c]], dtype=np.float64).reshape(-1, len(controls)) - center
         for c in CONDITIONS}

    best = None
    for r in range(max(1, restarts)):
        rng = np.random.default_rng([seed, r])
        chosen = {}
        spare = {}
        for c in CONDITIONS:
            chosen[c], spare[c] = [], []
            for g, k in strata[c]:
                perm = rng.permutation(g)
                chosen[c].append(list(perm[:k]))
                spare[c].append(list(perm[k:]))
        sums = np.array([X[c][[i for s in chosen[c] for i in s]].sum(axis=0) for c in CONDITIONS]).reshape(4, len(controls))
        sumsq = np.array([(X[c][[i for s in chosen[c] for i in s]] ** 2).sum(axis=0) for c in CONDITIONS]).reshape(4, len(controls))
        current = _objective(_f_from_sums(sums, sumsq, n_per_cell)) if controls else (0.0, 0.0)
        swappable = [(ci, si) for ci, c in enumerate(CONDITIONS)
                     for si in range(len(strata[c])) if spare[c][si] and chosen[c][si]]
        it = 0
        while controls and swappable and current[0] >= stop_below and it < max_iters:
            it += 1
            ci, si = swappable[rng.integers(len(swappable))]
            c = CONDITIONS[ci]
            a = rng.integers(len(chosen[c][si]))
            b = rng.integers(len(spare[c][si]))
            old, new = X[c][chosen[c][si][a]], X[c][spare[c][si][b]]
            sums[ci] += new - old
            sumsq[ci] += new ** 2 - old ** 2
            cand = _objective(_f_from_sums(sums, sumsq, n_per_cell))
            if cand < current:
                current = cand
                chosen[c][si][a], spare[c][si][b] = spare[c][si][b], chosen[c][si][a]
            else:
                sums[ci] -= new - old
                sumsq[ci] -= new ** 2 - old ** 2
        cells = {c: [by_cell[c][i] for i in sorted(i for s in chosen[c] for i in s)] for c in CONDITIONS}
        report = balance_report(cells, controls)
        logger.debug("restart %d: %d iterations, max F %.4f", r, it, report.max_f)
        if best is None or report.max_f < best.report.max_f:
            best = Selection(cells, report, r)
    if not best.report.passed:
        logger.warning("balance not reached; offending controls: %s", ", ".join(best.report.offending))
    return best


# -- presentation lists -------------------------------------------------------

@dataclass(frozen=True)
class ListEntry:
    item_id: str
    condition: str


@dataclass(frozen=True)
class PresentationList:
    list_id: int
    blocks: tuple[tuple[ListEntry, ...], ...]

    @property
    def entries(self) -> list[ListEntry]:
        return [e for b in self.blocks for e in b]


MAX_RUN = 2


def _completable(remaining: Mapping[str, int], last: str | None, run: int) -> bool:
    total = sum(remaining.values())
    for cond, m in remaining.items():
        others = total - m
        capacity = MAX_RUN * (others + 1) - (run if cond == last else 0)
        if m > capacity:
            return False
    return True


def _sequence(counts: list[dict], rng, last=None, run=0):
    """Order condition labels block by block with no run longer than MAX_RUN."""
    blocks = []
    for block_counts in counts:
        remaining = dict(block_counts)
        later = [dict(b) for b in counts[len(blocks) + 1:]]
        seq = []
        while any(remaining.values()):
            options, weights = [], []
            for cond in sorted(remaining):
                m = remaining[cond]
                if not m or (cond == last and run >= MAX_RUN):
                    continue
                nxt = dict(remaining)
                nxt[cond] -= 1
                new_run = run + 1 if cond == last else 1
                merged = dict(nxt)
                for b in later:
                    for k, v in b.items():
                        merged[k] = merged.get(k, 0) + v
                if _completable(merged, cond, new_run):
                    options.append(cond)
                    weights.append(m)
            if not options:
                return None
            w = np.asarray(weights, dtype=np.float64)
            cond = options[rng.choice(len(options), p=w / w.sum())]
            remaining[cond] -= 1
            run = run + 1 if cond == last else 1
            last = cond
            seq.append(cond)
        blocks.append(seq)
    return blocks


def randomize_lists(items: Sequence[tuple[str, str]], seed: int = 0, fillers: Sequence[str] = (),
                    n_lists: int = 2, n_blocks: int = 2, max_retries: int = 200) -> list[PresentationList]:
    """Pseudorandomize ``(item_id, condition)`` pairs into presentation lists.

    Every list is split into blocks whose per-condition counts (fillers
    included as their own category) differ by at most one. No more than
    two experimental items of one condition follow each other, counting
    across block boundaries and ignoring interleaved fillers.
    """
    by_cond = {}
    for item_id, cond in items:
        by_cond.setdefault(cond, []).append(item_id)
    totals = {c: len(v) for c, v in by_cond.items()}
    if totals and not _completable(totals, None, 0):
        worst = max(totals, key=totals.get)
        raise ListConstraintError(
            "run-length", f"{totals[worst]} items of {worst!r} cannot be separated by "
                          f"{sum(totals.values()) - totals[worst]} other items")
    out = []
    for list_no in range(n_lists):
        rng = np.random.default_rng([seed, list_no])
        for _ in range(max_retries):
            block_ids = [{} for _ in range(n_blocks)]
            offset = int(rng.integers(n_blocks))
            for cond in sorted(by_cond):
                ids = [by_cond[cond][i] for i in rng.permutation(len(by_cond[cond]))]
                for b in range(n_blocks):
                    block_ids[b][cond] = []
                for k, item_id in enumerate(ids):
                    block_ids[(k + offset) % n_blocks][cond].append(item_id)
                offset = (offset + len(ids)) % n_blocks
            labels = _sequence([{c: len(v) for c, v in b.items()} for b in block_ids], rng)
            if labels is not None:
                break
        else:
            raise ListConstraintError("run-length", f"no valid order found for list {list_no + 1} "
                                                    f"after {max_retries} attempts")
        filler_ids = [fillers[i] for i in rng.permutation(len(fillers))]
        filler_blocks = [filler_ids[b::n_blocks] for b in range(n_blocks)]
        blocks = []
        for b in range(n_blocks):
            pools = {c: list(v) for c, v in block_ids[b].items()}
            exp = [ListEntry(pools[c].pop(0), c) for c in labels[b]]
            fill = [ListEntry(f, FILLER) for f in filler_blocks[b]]
            length = len(exp) + len(fill)
            fill_pos = set(rng.choice(length, size=len(fill), replace=False).tolist()) if fill else set()
            seq, ei, fi = [], 0, 0
            for pos in range(length):
                if pos in fill_pos:
                    seq.append(fill[fi])
                    fi += 1
                else:
                    seq.append(exp[ei])
                    ei += 1
            blocks.append(tuple(seq))
        out.append(PresentationList(list_no + 1, tuple(blocks)))
    return out


# -- TSV interfaces -----------------------------------------------------------

POOL_COLUMNS = ("item_id", "sentence", "verb_idx", "adj_idx", "noun_idx", "closed_idx")
_LEMMA_COLUMNS = {"verb_lemma": "verb", "adj_lemma": "adjective", "noun_lemma": "noun"}


def _split_tsv(line: str) -> list[str]:
    return line.rstrip("\n").split("\t")


def read_pool_tsv(fh: TextIO) -> list[RawItem]:
    """Read candidate frames.

    Required columns: item_id, sentence, verb_idx, adj_idx, noun_idx,
    closed_idx (three comma-separated positions). Optional lemma columns:
    verb_lemma, adj_lemma, noun_lemma, closed_lemmas (comma-separated).
    """
    header = _split_tsv(fh.readline())
    missing = [c for c in POOL_COLUMNS if c not in header]
    if missing:
        raise ValueError(f"pool TSV lacks columns: {missing}")
    items = []
    for line in fh:
        if not line.strip():
            continue
        row = dict(zip(header, _split_tsv(line)))
        closed = [int(x) for x in row["closed_idx"].split(",")]
        if len(closed) != 3:
            raise ValueError(f"item {row['item_id']}: closed_idx needs three positions")
        slots = {"verb": int(row["verb_idx"]), "adjective": int(row["adj_idx"]),
                 "noun": int(row["noun_idx"]),
                 "closed1": closed[0], "closed2": closed[1], "closed3": closed[2]}
        lemmas = {slot: row[col] for col, slot in _LEMMA_COLUMNS.items() if row.get(col)}
        if row.get("closed_lemmas"):
            for slot, lemma in zip(CLOSED_SLOTS, row["closed_lemmas"].split(",")):
                if lemma:
                    lemmas[slot] = lemma
        items.append(RawItem(row["item_id"], row["sentence"], slots, lemmas))
    return items


SET_COLUMNS = ("item_id", "condition", "comma_after_target", "sentence") + FEATURES


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return fmt_float(v)


def write_set_tsv(items: Iterable[StimulusItem], fh: TextIO) -> None:
    fh.write("\t".join(SET_COLUMNS) + "\n")
    for it in items:
        row = [it.item_id, it.condition or "", "1" if it.comma_after_target else "0", it.sentence]
        row += [_fmt(it.features[k]) for k in FEATURES]
        fh.write("\t".join(row) + "\n")


def read_set_tsv(fh: TextIO) -> list[StimulusItem]:
    header = _split_tsv(fh.readline())
    items = []
    for line in fh:
        if not line.strip():
            continue
        row = dict(zip(header, _split_tsv(line)))
        features = {k: float(row[k]) for k in FEATURES if k in row}
        items.append(StimulusItem(row["item_id"], row.get("sentence", ""), {}, features,
                                  row.get("comma_after_target") == "1", row.get("condition") or None))
    return items


def write_balance_tsv(report: BalanceReport, fh: TextIO) -> None:
    cols = ["variable"] + [f"{c}_{s}" for c in CONDITIONS for s in ("mean", "sd")] + ["F", "controlled"]
    fh.write("\t".join(cols) + "\n")
    for v in report.variables:
        row = [v]
        for c in CONDITIONS:
            row += [f"{report.means[v][c]:.2f}", f"{report.sds[v][c]:.2f}"]
        row += [f"{report.f[v]:.2f}", "yes" if v in report.controls else "no"]
        fh.write("\t".join(row) + "\n")
    fh.write(f"# pass={'true' if report.passed else 'false'}\toffending={','.join(report.offending)}\n")


def write_lists_tsv(lists: Iterable[PresentationList], fh: TextIO) -> None:
    fh.write("list\tblock\tposition\titem_id\tcondition\n")
    for pl in lists:
        pos = 0
        for b, block in enumerate(pl.blocks, 1):
            for e in block:
                pos += 1
                fh.write(f"{pl.list_id}\t{b}\t{pos}\t{e.item_id}\t{e.condition}\n")
