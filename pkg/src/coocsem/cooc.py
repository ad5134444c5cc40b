"""Sentence co-occurrence counts and Dunning log-likelihood association.

Pairs are counted by presence: a sentence contributes at most 1 to the
count of any unordered word pair, so every 2x2 contingency table is a
partition of the corpus sentences.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations
from typing import Iterable, Iterator, TextIO

import numpy as np
from scipy import sparse

from ._parallel import chunked, map_shards
from .corpus import CorpusIndex, TokenizerConfig, parse_line
from .errors import DegenerateTableError, FilteredWordError

CHI2_CRIT_05 = 3.841
NEGATIVE_CLAMP = -1e-9


@dataclass(frozen=True)
class AssociationConfig:
    threshold: float = CHI2_CRIT_05
    log_base: float = 10.0

    def __post_init__(self):
        if self.threshold <= 1.0:
            # log(g2) must stay positive for every significant pair
            raise ValueError("significance threshold must exceed 1")
        if self.log_base <= 1.0:
            raise ValueError("log base must exceed 1")


@dataclass(frozen=True)
class ContingencyTable:
    k11: int
    k12: int
    k21: int
    k22: int

    def __post_init__(self):
        if min(self.k11, self.k12, self.k21, self.k22) < 0:
            raise ValueError(f"negative cell in {self}")

    @property
    def n(self) -> int:
        return self.k11 + self.k12 + self.k21 + self.k22

    @property
    def expected11(self) -> float:
        return (self.k11 + self.k12) * (self.k11 + self.k21) / self.n

    @property
    def above_expected(self) -> bool:
        # k11 > E11, compared in exact integer arithmetic
        return self.k11 * self.n > (self.k11 + self.k12) * (self.k11 + self.k21)

    @classmethod
    def from_counts(cls, k11: int, freq_a: int, freq_b: int, n: int) -> "ContingencyTable":
        return cls(k11, freq_a - k11, freq_b - k11, n - freq_a - freq_b + k11)


@dataclass(frozen=True)
class AssociationRecord:
    pair: tuple[str, str]
    g2: float
    as_value: float
    direction: bool
    table: ContingencyTable


def log_likelihood(table: ContingencyTable) -> float:
    """Dunning's G2 = 2 * sum k_ij ln(k_ij / E_ij), with 0 ln 0 = 0."""
    n = table.n
    if n == 0:
        raise DegenerateTableError("contingency table has n = 0")
    r1, r2 = table.k11 + table.k12, table.k21 + table.k22
    c1, c2 = table.k11 + table.k21, table.k12 + table.k22
    total = 0.0
    for k, r, c in ((table.k11, r1, c1), (table.k12, r1, c2),
                    (table.k21, r2, c1), (table.k22, r2, c2)):
        if k:
            total += k * math.log(k * n / (r * c))
    g2 = 2.0 * total
    if g2 < 0.0:
        if g2 < NEGATIVE_CLAMP:
            raise ArithmeticError(f"G2 = {g2} is negative beyond rounding for {table}")
        g2 = 0.0
    return g2


def strength_from_table(table: ContingencyTable, config: AssociationConfig = AssociationConfig()):
    """Return ``(g2, as_value, above_expected)`` for one table."""
    g2 = log_likelihood(table)
    above = table.above_expected
    if above and g2 >= config.threshold:
        return g2, math.log(g2, config.log_base), above
    return g2, 0.0, above


def log_likelihood_array(k11, freq_a, freq_b, n) -> np.ndarray:
    """Vectorized G2 over arrays of pair counts and marginal frequencies."""
    k11 = np.asarray(k11, dtype=np.float64)
    fa = np.asarray(freq_a, dtype=np.float64)
    fb = np.asarray(freq_b, dtype=np.float64)
    n = float(n)
    cells = (
        (k11, fa, fb),
        (fa - k11, fa, n - fb),
        (fb - k11, n - fa, fb),
        (n - fa - fb + k11, n - fa, n - fb),
    )
    total = np.zeros(np.broadcast(k11, fa, fb).shape)
    with np.errstate(divide="ignore", invalid="ignore"):
        for k, r, c in cells:
            total += np.where(k > 0, k * np.log(k * n / (r * c)), 0.0)
    g2 = 2.0 * total
    if np.any(g2 < NEGATIVE_CLAMP):
        raise ArithmeticError("G2 negative beyond rounding")
    return np.maximum(g2, 0.0)


def strength_array(k11, freq_a, freq_b, n, config: AssociationConfig = AssociationConfig()):
    """Vectorized ``(g2, as_value)``; see :func:`strength_from_table`."""
    g2 = log_likelihood_array(k11, freq_a, freq_b, n)
    k11 = np.asarray(k11, dtype=np.int64)
    above = k11 * n > np.asarray(freq_a, dtype=np.int64) * np.asarray(freq_b, dtype=np.int64)
    keep = above & (g2 >= config.threshold)
    with np.errstate(divide="ignore"):
        as_value = np.where(keep, np.log(np.where(keep, g2, 1.0)) / math.log(config.log_base), 0.0)
    return g2, as_value


def _count_pair_shard(lines, context):
    config, word_ids, n_words = context
    keys = []
    for raw in lines:
        tokens, _ = parse_line(raw, config)
        if tokens is None:
            continue
        ids = sorted({word_ids[t] for t in tokens if t in word_ids})
        if len(ids) > 1:
            keys.extend(a * n_words + b for a, b in combinations(ids, 2))
    if not keys:
        return np.empty(0, np.int64), np.empty(0, np.int64)
    return np.unique(np.fromiter(keys, np.int64, len(keys)), return_counts=True)


def _merge_keyed_counts(parts):
    keys = [k for k, _ in parts]
    counts = [c for _, c in parts]
    if not keys:
        return np.empty(0, np.int64), np.empty(0, np.int64)
    keys = np.concatenate(keys)
    counts = np.concatenate(counts)
    uniq, inverse = np.unique(keys, return_inverse=True)
    merged = np.zeros(len(uniq), np.int64)
    np.add.at(merged, inverse, counts)
    return uniq, merged


class PairStats:
    """Sparse symmetric sentence co-occurrence counts over a CorpusIndex.

    Word ids follow the index's frequency rank (id = rank - 1). Words that
    failed the pair-count filter have no row.
    """

    def __init__(self, index: CorpusIndex, pair_keys: np.ndarray, pair_counts: np.ndarray,
                 retained: Iterable[str], min_freq: int):
        self.index = index
        self.min_freq = min_freq
        self.words = index.words_by_rank
        self.word_ids = {w: i for i, w in enumerate(self.words)}
        self.retained = frozenset(retained)
        v = len(self.words)
        self.pair_keys = np.asarray(pair_keys, np.int64)
        self.pair_counts = np.asarray(pair_counts, np.int64)
        a, b = np.divmod(self.pair_keys, v)
        self.matrix = sparse.csr_matrix(
            (np.concatenate([self.pair_counts, self.pair_counts]),
             (np.concatenate([a, b]), np.concatenate([b, a]))),
            shape=(v, v), dtype=np.int64,
        )
        self.matrix.sort_indices()
        self.sentence_freqs = np.array([index.vocab[w].sentence_freq for w in self.words], np.int64)

    def __len__(self):
        return len(self.pair_keys)

    @property
    def n_sentences(self) -> int:
        return self.index.n_sentences

    def _id(self, word: str) -> int:
        entry = self.index.entry(word)
        if word not in self.retained:
            raise FilteredWordError(entry.word, self.min_freq)
        return self.word_ids[word]

    def count(self, a: str, b: str) -> int:
        i, j = self._id(a), self._id(b)
        if i == j:
            return self.index.vocab[a].sentence_freq
        return int(self.matrix[i, j])

    def neighbors(self, word: str) -> tuple[np.ndarray, np.ndarray]:
        """Ids and counts of every word sharing at least one sentence with ``word``."""
        i = self._id(word)
        start, end = self.matrix.indptr[i], self.matrix.indptr[i + 1]
        return self.matrix.indices[start:end], self.matrix.data[start:end]

    def items(self) -> Iterator[tuple[tuple[str, str], int]]:
        """All counted pairs as ``((word_a, word_b), k11)`` with word_a < word_b,
        in pair-lexicographic order."""
        v = len(self.words)
        a, b = np.divmod(self.pair_keys, v)
        lex = np.empty(v, np.int64)
        lex[np.argsort(np.array(self.words, dtype=object), kind="stable")] = np.arange(v)
        la, lb = lex[a], lex[b]
        lo, hi = np.minimum(la, lb), np.maximum(la, lb)
        first = np.where(la < lb, a, b)
        second = np.where(la < lb, b, a)
        order = np.lexsort((hi, lo))
        words = self.words
        for idx in order:
            yield (words[first[idx]], words[second[idx]]), int(self.pair_counts[idx])


def count_pairs(lines: Iterable, index: CorpusIndex, config: TokenizerConfig = TokenizerConfig(), *,
                min_freq: int = 2, words: Iterable[str] | None = None,
                threads: int = 1, chunk_size: int = 20000) -> PairStats:
    """Count, for every pair of retained words, the sentences containing both.

    ``index`` must come from the same corpus and tokenizer configuration.
    A word is retained if its sentence frequency is at least ``min_freq``
    and, when ``words`` is given, it belongs to that set.
    """
    allowed = None if words is None else set(words)
    retained = [w for w in index.words_by_rank
                if index.vocab[w].sentence_freq >= min_freq and (allowed is None or w in allowed)]
    rank_ids = {w: i for i, w in enumerate(index.words_by_rank)}
    word_ids = {w: rank_ids[w] for w in retained}
    context = (config, word_ids, len(index))
    parts = list(map_shards(_count_pair_shard, chunked(lines, chunk_size), threads, context))
    keys, counts = _merge_keyed_counts(parts)
    return PairStats(index, keys, counts, retained, min_freq)


def count_pairs_path(path, index: CorpusIndex, config: TokenizerConfig = TokenizerConfig(), **kwargs) -> PairStats:
    with open(path, "rb") as fh:
        return count_pairs(fh, index, config, **kwargs)


def contingency(a: str, b: str, pair_stats: PairStats) -> ContingencyTable:
    k11 = pair_stats.count(a, b)
    index = pair_stats.index
    return ContingencyTable.from_counts(k11, index.vocab[a].sentence_freq,
                                        index.vocab[b].sentence_freq, index.n_sentences)


def association_strength(a: str, b: str, pair_stats: PairStats,
                         config: AssociationConfig = AssociationConfig()) -> AssociationRecord:
    pair = (a, b) if a <= b else (b, a)
    table = contingency(*pair, pair_stats)
    g2, as_value, above = strength_from_table(table, config)
    return AssociationRecord(pair, g2, as_value, above, table)


PAIR_COLUMNS = ("word_a", "word_b", "k11", "g2", "as_value")


def fmt_float(x: float) -> str:
    return format(float(x), ".10g")


def write_pairs_tsv(pair_stats: PairStats, fh: TextIO,
                    config: AssociationConfig = AssociationConfig(), batch: int = 200000) -> None:
    """Write every counted pair with its G2 and AS, pair-lexicographic."""
    fh.write("\t".join(PAIR_COLUMNS) + "\n")
    sf = pair_stats.index.vocab
    n = pair_stats.n_sentences
    rows = pair_stats.items()
    while True:
        chunk = [next(rows, None) for _ in range(batch)]
        chunk = [r for r in chunk if r is not None]
        if not chunk:
            break
        k11 = np.array([c for _, c in chunk], np.int64)
        fa = np.array([sf[a].sentence_freq for (a, _), _ in chunk], np.int64)
        fb = np.array([sf[b].sentence_freq for (_, b), _ in chunk], np.int64)
        g2, as_value = strength_array(k11, fa, fb, n, config)
        fh.writelines(
            f"{a}\t{b}\t{c}\t{fmt_float(g)}\t{fmt_float(s)}\n"
            for ((a, b), c), g, s in zip(chunk, g2, as_value)
        )
        if len(chunk) < batch:
            break
