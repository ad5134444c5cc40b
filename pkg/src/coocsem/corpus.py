"""Sentence-per-line corpus ingestion and word frequency metadata.

The counting unit is sentence presence: a word occurring three times in
one sentence adds 1 to its sentence frequency and 3 to its token
frequency.
"""

from __future__ import annotations

import logging
import math
import re
import unicodedata
from collections import Counter
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Iterable, Iterator, Mapping, TextIO

from ._parallel import chunked, map_shards
from .errors import EmptyCorpusError, NotInVocabularyError

logger = logging.getLogger(__name__)

_ID_PREFIX = re.compile(r"^\s*\d+\t")
ID_MODES = ("auto", "yes", "no")
FREQUENCY_MODES = ("sentence", "token")


@dataclass(frozen=True)
class TokenizerConfig:
    case_fold: bool = False
    strip_punctuation: bool = False
    id_column: str = "auto"

    def __post_init__(self):
        if self.id_column not in ID_MODES:
            raise ValueError(f"id_column must be one of {ID_MODES}, got {self.id_column!r}")


@dataclass(frozen=True)
class SentenceRecord:
    sentence_id: int
    tokens: tuple[str, ...]


@dataclass(frozen=True)
class VocabEntry:
    word: str
    sentence_freq: int
    token_freq: int
    freq_rank: int
    freq_class: int


def _strip_punct(token: str) -> str:
    start, end = 0, len(token)
    while start < end and unicodedata.category(token[start]).startswith("P"):
        start += 1
    while end > start and unicodedata.category(token[end - 1]).startswith("P"):
        end -= 1
    return token[start:end]


def tokenize(text: str, config: TokenizerConfig = TokenizerConfig()) -> list[str]:
    tokens = text.split()
    if config.strip_punctuation:
        tokens = [t for t in map(_strip_punct, tokens) if t]
    if config.case_fold:
        tokens = [t.casefold() for t in tokens]
    return tokens


def parse_line(raw, config: TokenizerConfig = TokenizerConfig()):
    """Turn one raw corpus line into tokens.

    Returns ``(tokens, None)`` on success and ``(None, reason)`` when the
    line has to be skipped. ``raw`` may be ``bytes`` (decoded strictly as
    UTF-8) or ``str``.
    """
    if isinstance(raw, bytes):
        try:
            raw = raw.decode("utf-8")
        except UnicodeDecodeError:
            return None, "malformed_utf8"
    line = raw.rstrip("\r\n")
    if config.id_column != "no":
        m = _ID_PREFIX.match(line)
        if m:
            line = line[m.end():]
        elif config.id_column == "yes":
            return None, "missing_id"
    if "\t" in line:
        return None, "tab_in_data"
    tokens = tokenize(line, config)
    if not tokens:
        return None, "empty_line"
    return tokens, None


def read_sentences(lines: Iterable, config: TokenizerConfig = TokenizerConfig()) -> Iterator[SentenceRecord]:
    sentence_id = 0
    for raw in lines:
        tokens, _ = parse_line(raw, config)
        if tokens is not None:
            yield SentenceRecord(sentence_id, tuple(tokens))
            sentence_id += 1


def _count_shard(lines, config):
    sentence_freq = Counter()
    token_freq = Counter()
    diagnostics = Counter()
    n = 0
    for raw in lines:
        tokens, reason = parse_line(raw, config)
        if tokens is None:
            diagnostics[reason] += 1
            continue
        n += 1
        token_freq.update(tokens)
        sentence_freq.update(set(tokens))
    return n, sentence_freq, token_freq, diagnostics


def frequency_class_of(freq: int, f_max: int) -> int:
    """``round(log2(f_max / freq))`` with halves rounded away from zero."""
    return math.floor(math.log2(f_max / freq) + 0.5)


class CorpusIndex:
    """Immutable vocabulary with sentence/token frequencies and ranks."""

    def __init__(self, n_sentences: int, sentence_freq: Mapping[str, int],
                 token_freq: Mapping[str, int], diagnostics: Mapping[str, int] | None = None,
                 frequency_mode: str = "sentence"):
        if frequency_mode not in FREQUENCY_MODES:
            raise ValueError(f"frequency_mode must be one of {FREQUENCY_MODES}")
        if n_sentences <= 0 or not sentence_freq:
            raise EmptyCorpusError("corpus contains no sentences")
        self.n_sentences = n_sentences
        self.frequency_mode = frequency_mode
        self.diagnostics = MappingProxyType(dict(diagnostics or {}))
        ranked = sorted(sentence_freq.items(), key=lambda kv: (-kv[1], kv[0]))
        self.f_max = ranked[0][1]
        if frequency_mode == "token":
            class_freq, class_max = token_freq, max(token_freq.values())
        else:
            class_freq, class_max = sentence_freq, self.f_max
        self._class_max = class_max
        vocab = {}
        for rank, (word, sf) in enumerate(ranked, 1):
            vocab[word] = VocabEntry(word, sf, token_freq[word], rank,
                                     frequency_class_of(class_freq[word], class_max))
        self.vocab = MappingProxyType(vocab)
        self.words_by_rank = tuple(w for w, _ in ranked)

    def __len__(self):
        return len(self.vocab)

    def __contains__(self, word):
        return word in self.vocab

    def __eq__(self, other):
        if not isinstance(other, CorpusIndex):
            return NotImplemented
        return (self.n_sentences == other.n_sentences
                and self.frequency_mode == other.frequency_mode
                and dict(self.vocab) == dict(other.vocab))

    def __repr__(self):
        return f"CorpusIndex(n_sentences={self.n_sentences}, vocab={len(self)}, f_max={self.f_max})"

    def entry(self, word: str) -> VocabEntry:
        try:
            return self.vocab[word]
        except KeyError:
            raise NotInVocabularyError(word) from None

    def sentence_freq(self, word: str) -> int:
        return self.entry(word).sentence_freq


def ingest(lines: Iterable, config: TokenizerConfig = TokenizerConfig(), *,
           threads: int = 1, chunk_size: int = 20000,
           frequency_mode: str = "sentence") -> CorpusIndex:
    """Build a :class:`CorpusIndex` from an iterable of corpus lines.

    Lines are processed in shards of ``chunk_size``; with ``threads > 1``
    shards are counted in worker processes. Shard counts are merged by
    addition, so the result does not depend on ``threads``.

    Skipped lines (malformed UTF-8, empty, stray tabs) are tallied in
    ``index.diagnostics``.
    """
    n = 0
    sentence_freq = Counter()
    token_freq = Counter()
    diagnostics = Counter()
    for sn, ssf, stf, sdiag in map_shards(_count_shard, chunked(lines, chunk_size), threads, config):
        n += sn
        sentence_freq.update(ssf)
        token_freq.update(stf)
        diagnostics.update(sdiag)
    if diagnostics:
        logger.info("skipped lines: %s", dict(sorted(diagnostics.items())))
    if n == 0:
        raise EmptyCorpusError("corpus contains no sentences")
    return CorpusIndex(n, sentence_freq, token_freq, diagnostics, frequency_mode)


def ingest_path(path, config: TokenizerConfig = TokenizerConfig(), **kwargs) -> CorpusIndex:
    with open(path, "rb") as fh:
        return ingest(fh, config, **kwargs)


def merge_indexes(parts: Iterable[CorpusIndex], frequency_mode: str = "sentence") -> CorpusIndex:
    """Combine indexes built from disjoint shards of one corpus."""
    n = 0
    sf, tf, diag = Counter(), Counter(), Counter()
    for part in parts:
        n += part.n_sentences
        for e in part.vocab.values():
            sf[e.word] += e.sentence_freq
            tf[e.word] += e.token_freq
        diag.update(part.diagnostics)
    return CorpusIndex(n, sf, tf, diag, frequency_mode)


def frequency_class(word: str, index: CorpusIndex) -> int:
    return index.entry(word).freq_class


def top_frequent(index: CorpusIndex, k: int) -> list[str]:
    """The ``k`` words with the highest sentence frequency (ties: lexicographic)."""
    if k < 0:
        raise ValueError("k must be non-negative")
    return list(index.words_by_rank[:k])


INDEX_COLUMNS = ("word", "sentence_freq", "token_freq", "freq_rank", "freq_class")


def write_index_tsv(index: CorpusIndex, fh: TextIO) -> None:
    fh.write(f"# n_sentences={index.n_sentences}\tf_max={index.f_max}\tfrequency_mode={index.frequency_mode}\n")
    fh.write("\t".join(INDEX_COLUMNS) + "\n")
    for word in index.words_by_rank:
        e = index.vocab[word]
        fh.write(f"{e.word}\t{e.sentence_freq}\t{e.token_freq}\t{e.freq_rank}\t{e.freq_class}\n")


def read_index_tsv(fh: TextIO) -> CorpusIndex:
    header = fh.readline().lstrip("#").split()
    meta = dict(item.split("=", 1) for item in header)
    columns = fh.readline().rstrip("\n").split("\t")
    if tuple(columns) != INDEX_COLUMNS:
        raise ValueError(f"unexpected index columns: {columns}")
    sf, tf = {}, {}
    for line in fh:
        word, s, t, _, _ = line.rstrip("\n").split("\t")
        sf[word] = int(s)
        tf[word] = int(t)
    return CorpusIndex(int(meta["n_sentences"]), sf, tf,
                       frequency_mode=meta.get("frequency_mode", "sentence"))
