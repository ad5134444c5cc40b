"""Word length and orthographic neighborhood size (Coltheart's N).

A neighbor is a lexicon word of the same length that differs in exactly
one character position. Characters are Unicode code points, so umlauts
count as one character.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Iterable

from .corpus import CorpusIndex
from .errors import NotInVocabularyError


@dataclass(frozen=True)
class LexProfile:
    word: str
    length: int
    on_count: int
    freq_class: int


class Lexicon:
    """Word set indexed by one-position wildcard patterns.

    Two distinct same-length words are neighbors iff they share exactly
    one pattern (the one masking the position where they differ), so a
    query costs one lookup per character.
    """

    def __init__(self, words: Iterable[str], case_sensitive: bool = True):
        self.case_sensitive = case_sensitive
        self.words = frozenset(self._norm(w) for w in words if w)
        self._patterns = Counter()
        for w in self.words:
            for i in range(len(w)):
                self._patterns[(i, w[:i], w[i + 1:])] += 1

    @classmethod
    def from_index(cls, index: CorpusIndex, min_freq: int = 1, case_sensitive: bool = True) -> "Lexicon":
        return cls((e.word for e in index.vocab.values() if e.sentence_freq >= min_freq), case_sensitive)

    def _norm(self, word: str) -> str:
        return word if self.case_sensitive else word.casefold()

    def __len__(self):
        return len(self.words)

    def __contains__(self, word):
        return self._norm(word) in self.words

    def neighbors_count(self, word: str) -> int:
        w = self._norm(word)
        self_hits = 1 if w in self.words else 0
        return sum(self._patterns[(i, w[:i], w[i + 1:])] - self_hits for i in range(len(w)))


def orthographic_neighbors(word: str, lexicon: Lexicon) -> int:
    if not word:
        raise ValueError("word must be non-empty")
    return lexicon.neighbors_count(word)


def word_length(word: str) -> int:
    return len(word)


def profile(word: str, index: CorpusIndex, lexicon: Lexicon) -> LexProfile:
    if word not in index:
        raise NotInVocabularyError(word)
    return LexProfile(word, word_length(word), orthographic_neighbors(word, lexicon),
                      index.vocab[word].freq_class)


def write_profiles_tsv(profiles: Iterable[LexProfile], fh) -> None:
    fh.write("word\tlength\ton_count\tfreq_class\n")
    for p in profiles:
        fh.write(f"{p.word}\t{p.length}\t{p.on_count}\t{p.freq_class}\n")
