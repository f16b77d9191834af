"""Canonical enumeration of words over a finite alphabet.

Words (tuples) are indexed 1-based: all words of length 1 come first, then
all words of length 2, and so on; within a length block words are ordered
lexicographically by symbol index.  Word i carries weight 2**-i, so the
weights sum to exactly 1 and the total weight of all words longer than k
has the closed form 2**-M_k, where M_k is the number of words of length
at most k.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np


@dataclass(frozen=True)
class Alphabet:
    """An ordered finite alphabet of at least two distinct symbols."""

    symbols: tuple[str, ...]

    def __post_init__(self):
        if len(self.symbols) < 2:
            raise ValueError("alphabet needs at least 2 symbols")
        if len(set(self.symbols)) != len(self.symbols):
            raise ValueError("alphabet symbols must be distinct")
        if any(not isinstance(s, str) or not s for s in self.symbols):
            raise ValueError("alphabet symbols must be non-empty strings")

    @property
    def size(self) -> int:
        return len(self.symbols)

    def index(self, symbol: str) -> int:
        try:
            return self.symbols.index(symbol)
        except ValueError:
            raise ValueError(f"symbol {symbol!r} not in alphabet {self.symbols}") from None

    def encode(self, word: Iterable[str]) -> np.ndarray:
        """Map a sequence of symbols (or a plain string) to int codes."""
        return np.array([self.index(s) for s in word], dtype=np.int64)

    def decode(self, codes: Sequence[int]) -> tuple[str, ...]:
        return tuple(self.symbols[int(c)] for c in codes)

    @property
    def is_char(self) -> bool:
        """True when every symbol is a single character (compact text I/O)."""
        return all(len(s) == 1 for s in self.symbols)


BINARY = Alphabet(("0", "1"))

DEFAULT_MAX_DEPTH = 8


class TupleEnumeration:
    """Indexing, weights and tail masses for words of length <= max_depth.

    The index arithmetic is exact for arbitrary depths; max_depth only
    bounds which words may be materialized through :meth:`tuple_at` /
    :meth:`index_of`.
    """

    def __init__(self, alphabet: Alphabet, max_depth: int = DEFAULT_MAX_DEPTH):
        if max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        self.alphabet = alphabet
        self.max_depth = max_depth
        m = alphabet.size
        # cumulative[l] = M_l = number of words of length <= l
        self._cumulative = [0]
        for length in range(1, max_depth + 1):
            self._cumulative.append(self._cumulative[-1] + m**length)
        self._weights_cache: dict[int, np.ndarray] = {}

    def words_up_to(self, length: int) -> int:
        """M_l: how many words have length <= l."""
        if length < 0:
            raise ValueError("length must be >= 0")
        if length <= self.max_depth:
            return self._cumulative[length]
        m = self.alphabet.size
        return self._cumulative[self.max_depth] + sum(
            m**j for j in range(self.max_depth + 1, length + 1)
        )

    def block_start(self, length: int) -> int:
        """Global index of the first word of the given length."""
        return self.words_up_to(length - 1) + 1

    def index_of(self, word) -> int:
        """Global 1-based index of a word (string or symbol sequence)."""
        codes = self._codes(word)
        length = len(codes)
        if length == 0:
            raise ValueError("word must be nonempty")
        if length > self.max_depth:
            raise ValueError(f"word length {length} exceeds max_depth {self.max_depth}")
        return self.block_start(length) + self.rank_of(codes)

    def tuple_at(self, i: int) -> tuple[str, ...]:
        """Inverse of index_of; errors outside the materialized range."""
        if i < 1 or i > self._cumulative[self.max_depth]:
            raise ValueError(
                f"index {i} outside materialized range 1..{self._cumulative[self.max_depth]}"
            )
        length = 1
        while self._cumulative[length] < i:
            length += 1
        offset = i - self._cumulative[length - 1] - 1
        return self.alphabet.decode(self.unrank(offset, length))

    def rank_of(self, codes: Sequence[int]) -> int:
        """Lexicographic 0-based rank of a word within its length block."""
        m = self.alphabet.size
        rank = 0
        for c in codes:
            rank = rank * m + int(c)
        return rank

    def unrank(self, rank: int, length: int) -> list[int]:
        m = self.alphabet.size
        codes = [0] * length
        for pos in reversed(range(length)):
            rank, codes[pos] = divmod(rank, m)
        return codes

    def weight(self, i: int) -> float:
        """Weight 2**-i of the word with global index i (0.0 on underflow)."""
        if i < 1:
            raise ValueError("index must be >= 1")
        return math.ldexp(1.0, -i) if i <= 1074 else 0.0

    def weights_for_length(self, length: int) -> np.ndarray:
        """Weights of the whole length block, in lexicographic order."""
        if length in self._weights_cache:
            return self._weights_cache[length]
        if not 1 <= length <= self.max_depth:
            raise ValueError(f"length must be in 1..{self.max_depth}")
        start = self.block_start(length)
        exponents = -(start + np.arange(self.alphabet.size**length, dtype=np.int64))
        w = np.ldexp(1.0, np.maximum(exponents, -1075).astype(np.int32))
        w.flags.writeable = False
        self._weights_cache[length] = w
        return w

    def tail_mass(self, k: int) -> float:
        """Total weight of all words strictly longer than k: 2**-M_k."""
        if k < 1:
            raise ValueError("k must be >= 1")
        exponent = self.words_up_to(k)
        return math.ldexp(1.0, -exponent) if exponent <= 1074 else 0.0

    def _codes(self, word) -> np.ndarray:
        if isinstance(word, np.ndarray) and word.dtype.kind == "i":
            if word.size and (word.min() < 0 or word.max() >= self.alphabet.size):
                raise ValueError("symbol code outside alphabet")
            return word
        return self.alphabet.encode(word)


@lru_cache(maxsize=None)
def get_enumeration(alphabet: Alphabet, max_depth: int = DEFAULT_MAX_DEPTH) -> TupleEnumeration:
    """Shared enumeration instances; immutable, so caching is safe."""
    return TupleEnumeration(alphabet, max_depth)
