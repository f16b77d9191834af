"""Word counting, empirical frequencies and the empirical distance.

The empirical distance between a sample X and a process rho is the
weighted sum, over all words B up to a truncation depth, of
|nu(X, B) - rho(B)|, where nu is the overlapping-window frequency of B
in X.  Words longer than the sample have frequency 0 but still
contribute their w * rho(B) term.  The omitted tail beyond the depth is
certified by the enumeration's closed-form tail mass.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .enumeration import Alphabet, get_enumeration


@dataclass(frozen=True)
class DistanceValue:
    """A truncated distance together with its certified truncation error.

    ``value`` is the exact sum over words of length <= ``depth``; the
    omitted longer words contribute somewhere in [0, tail_bound], so the
    untruncated distance lies in [value, value + tail_bound].
    """

    value: float
    tail_bound: float
    depth: int

    @property
    def upper_bound(self) -> float:
        return self.value + self.tail_bound

    def certified_above(self, threshold: float) -> bool:
        """True when the untruncated distance provably exceeds threshold."""
        return self.value - self.tail_bound > threshold

    def certified_within(self, radius: float) -> bool:
        """True when the untruncated distance provably is <= radius."""
        return self.value + self.tail_bound <= radius


class Sample:
    """A finite sequence of alphabet symbols, stored as integer codes."""

    def __init__(self, alphabet: Alphabet, codes: np.ndarray):
        codes = np.asarray(codes, dtype=np.int64)
        if codes.ndim != 1 or codes.size < 1:
            raise ValueError("sample must be a nonempty 1-d sequence")
        if codes.min() < 0 or codes.max() >= alphabet.size:
            raise ValueError("sample contains codes outside the alphabet")
        codes.flags.writeable = False
        self.alphabet = alphabet
        self.codes = codes
        self._freq_cache: dict[int, tuple[np.ndarray, ...]] = {}

    @classmethod
    def from_symbols(cls, alphabet: Alphabet, symbols) -> "Sample":
        return cls(alphabet, alphabet.encode(symbols))

    @property
    def n(self) -> int:
        return int(self.codes.size)

    def __len__(self) -> int:
        return self.n

    @property
    def text(self) -> str:
        return "".join(self.alphabet.decode(self.codes))

    def frequency_vectors(self, depth: int) -> tuple[np.ndarray, ...]:
        """nu(X, B) for every word B of each length 1..depth, lex order.

        One linear pass per length; empty-window lengths (> n) yield
        all-zero vectors, matching the frequency definition.
        """
        if depth < 1:
            raise ValueError("depth must be >= 1")
        if depth in self._freq_cache:
            return self._freq_cache[depth]
        m = self.alphabet.size
        n = self.n
        vectors = []
        window_codes = self.codes
        for length in range(1, depth + 1):
            if length > n:
                vectors.append(np.zeros(m**length))
                continue
            if length > 1:
                window_codes = window_codes[:-1] * m + self.codes[length - 1 :]
            counts = np.bincount(window_codes, minlength=m**length)
            vectors.append(counts / (n - length + 1))
        result = tuple(vectors)
        for v in result:
            v.flags.writeable = False
        self._freq_cache[depth] = result
        return result

    def __getstate__(self):
        return {"alphabet": self.alphabet, "codes": np.array(self.codes)}

    def __setstate__(self, state):
        self.__init__(state["alphabet"], state["codes"])


def count_occurrences(sample: Sample, word) -> int:
    """Number of (overlapping) occurrences of a word in the sample."""
    codes = sample.alphabet.encode(word) if not isinstance(word, np.ndarray) else word
    k = len(codes)
    if k == 0:
        raise ValueError("word must be nonempty")
    if k > sample.n:
        return 0
    hits = np.ones(sample.n - k + 1, dtype=bool)
    for j, c in enumerate(codes):
        hits &= sample.codes[j : sample.n - k + 1 + j] == c
    return int(hits.sum())


def frequency(sample: Sample, word) -> float:
    """Occurrence count divided by the number of windows; 0 for words longer than X."""
    codes = sample.alphabet.encode(word) if not isinstance(word, np.ndarray) else word
    k = len(codes)
    if k > sample.n:
        return 0.0
    return count_occurrences(sample, codes) / (sample.n - k + 1)


def empirical_distance(sample: Sample, process, depth: int) -> DistanceValue:
    """Empirical distance between a sample and a process distribution.

    Sums w_i * |nu(X, B_i) - rho(B_i)| over every word of length <= depth.
    """
    if process.alphabet != sample.alphabet:
        raise ValueError("process and sample alphabets differ")
    enum = get_enumeration(sample.alphabet, max(depth, 8))
    freqs = sample.frequency_vectors(depth)
    value = 0.0
    for length in range(1, depth + 1):
        weights = enum.weights_for_length(length)
        value += float(weights @ np.abs(freqs[length - 1] - process.marginal_vector(length)))
    return DistanceValue(value=value, tail_bound=enum.tail_mass(depth), depth=depth)


def empirical_distance_to_set(sample: Sample, hypothesis, depth: int) -> DistanceValue:
    """Distance from a sample to a hypothesis set (its minimizer's value)."""
    dist, _ = hypothesis.min_empirical_distance(sample, depth)
    return dist
