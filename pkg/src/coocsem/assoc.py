"""Ranked associate sets and common-associate (CA) overlap counts.

An associate of a cue is any word whose association strength with the
cue is positive. Each cue keeps at most ``cap`` associates, after the
corpus's most frequent words have been removed; the overlap of two words
is the number of associates they share.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence, TextIO

import numpy as np

from ._parallel import map_shards
from .cooc import AssociationConfig, PairStats, fmt_float, strength_array
from .corpus import top_frequent
from .errors import CoocsemError, MissingCueError

DEFAULT_CAP = 1000
DEFAULT_STOPLIST_SIZE = 100

HIGH, LOW, MID = "High", "Low", "Mid"


@dataclass(frozen=True)
class CABands:
    high: int = 60   # High: ca > high
    low: int = 15    # Low:  ca < low

    def __post_init__(self):
        if self.low > self.high + 1:
            raise ValueError("low band threshold must not exceed high threshold")

    def band(self, ca_count: int) -> str:
        if ca_count > self.high:
            return HIGH
        if ca_count < self.low:
            return LOW
        return MID


@dataclass(frozen=True)
class AssociateSet:
    cue: str
    associates: tuple[tuple[str, float], ...]

    def __len__(self):
        return len(self.associates)

    @cached_property
    def members(self) -> frozenset:
        return frozenset(w for w, _ in self.associates)


@dataclass(frozen=True)
class OverlapResult:
    pair: tuple[str, str]
    ca_count: int
    band: str


def default_stoplist(pair_stats: PairStats, size: int = DEFAULT_STOPLIST_SIZE) -> frozenset:
    return frozenset(top_frequent(pair_stats.index, size))


def build_associates(cue: str, pair_stats: PairStats, stoplist: Iterable[str] | None = None, *,
                     cap: int = DEFAULT_CAP, config: AssociationConfig = AssociationConfig(),
                     stoplist_before_cap: bool = True) -> AssociateSet:
    """Rank the significant co-occurrents of ``cue`` by association strength.

    Ties are broken by word order. With ``stoplist_before_cap`` (default)
    stoplisted words are dropped before keeping the top ``cap``, so the
    cap is filled with non-stoplist words.
    """
    stop = default_stoplist(pair_stats) if stoplist is None else frozenset(stoplist)
    ids, k11 = pair_stats.neighbors(cue)
    f_cue = pair_stats.index.vocab[cue].sentence_freq
    _, as_value = strength_array(k11, f_cue, pair_stats.sentence_freqs[ids],
                                 pair_stats.n_sentences, config)
    words = pair_stats.words
    ranked = [(words[i], float(s)) for i, s in zip(ids, as_value) if s > 0.0 and words[i] != cue]
    if stoplist_before_cap:
        ranked = [r for r in ranked if r[0] not in stop]
    ranked.sort(key=lambda r: (-r[1], r[0]))
    ranked = ranked[:cap]
    if not stoplist_before_cap:
        ranked = [r for r in ranked if r[0] not in stop]
    return AssociateSet(cue, tuple(ranked))


def _build_shard(cues, context):
    pair_stats, stoplist, kwargs = context
    return [build_associates(c, pair_stats, stoplist, **kwargs) for c in cues]


class AssociateStore:
    """Write-once mapping of cue -> :class:`AssociateSet`.

    If ``pair_stats`` is given, missing cues are built on first access;
    otherwise a missing cue raises :class:`MissingCueError`.
    """

    def __init__(self, sets: Iterable[AssociateSet] = (), pair_stats: PairStats | None = None,
                 stoplist: Iterable[str] | None = None, **build_kwargs):
        self._sets = {s.cue: s for s in sets}
        self.pair_stats = pair_stats
        if pair_stats is not None and stoplist is None:
            stoplist = default_stoplist(pair_stats)
        self.stoplist = None if stoplist is None else frozenset(stoplist)
        self.build_kwargs = build_kwargs

    def __contains__(self, cue):
        return cue in self._sets

    def __len__(self):
        return len(self._sets)

    def __iter__(self):
        return iter(self._sets)

    def get(self, cue: str) -> AssociateSet:
        try:
            return self._sets[cue]
        except KeyError:
            pass
        if self.pair_stats is None:
            raise MissingCueError(cue)
        aset = build_associates(cue, self.pair_stats, self.stoplist, **self.build_kwargs)
        self._sets[cue] = aset
        return aset

    def build(self, cues: Iterable[str], threads: int = 1, chunk: int = 64) -> None:
        """Eagerly build sets for ``cues``, optionally in worker processes."""
        if self.pair_stats is None:
            raise ValueError("store has no pair statistics to build from")
        todo = sorted({c for c in cues if c not in self._sets})
        shards = [todo[i:i + chunk] for i in range(0, len(todo), chunk)]
        context = (self.pair_stats, self.stoplist, self.build_kwargs)
        for sets in map_shards(_build_shard, shards, threads, context):
            for s in sets:
                self._sets[s.cue] = s


def common_associates(w1: str, w2: str, store: AssociateStore, bands: CABands = CABands()) -> OverlapResult:
    a, b = store.get(w1), store.get(w2)
    ca = len(a.members & b.members)
    return OverlapResult((w1, w2), ca, bands.band(ca))


@dataclass
class BatchResult:
    results: list = field(default_factory=list)
    errors: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.errors


def batch_ca(pairs: Sequence[tuple[str, str]], store: AssociateStore, bands: CABands = CABands()) -> BatchResult:
    """:func:`common_associates` over ``pairs``, in order.

    A failing pair leaves ``None`` at its position and its exception in
    ``errors`` keyed by position; the remaining pairs are still computed.
    """
    out = BatchResult()
    for i, (w1, w2) in enumerate(pairs):
        try:
            out.results.append(common_associates(w1, w2, store, bands))
        except CoocsemError as exc:
            out.results.append(None)
            out.errors[i] = exc
    return out


def write_associates_tsv(aset: AssociateSet, fh: TextIO) -> None:
    fh.write("rank\tassociate\tas_value\n")
    for rank, (word, value) in enumerate(aset.associates, 1):
        fh.write(f"{rank}\t{word}\t{fmt_float(value)}\n")


def write_ca_tsv(results: Iterable[OverlapResult | None], fh: TextIO) -> None:
    fh.write("word_a\tword_b\tca_count\tband\n")
    for r in results:
        if r is not None:
            fh.write(f"{r.pair[0]}\t{r.pair[1]}\t{r.ca_count}\t{r.band}\n")
