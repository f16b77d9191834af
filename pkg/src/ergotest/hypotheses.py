"""Hypothesis sets that can minimize the empirical distance over themselves.

A hypothesis set is a collection of stationary ergodic processes; the
tester only ever interacts with it through ``min_empirical_distance``,
which returns the smallest empirical distance from a sample to the
set's representation together with the member achieving it.

Three representations are provided: explicit finite lists (exact
minimum), compact boxes of Markov transition parameters (deterministic
grid scan plus pattern-search refinement), and distance balls given by
an explicit list of certified members.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np

from .empirical import DistanceValue, Sample, empirical_distance
from .enumeration import Alphabet, get_enumeration
from .processes import (
    GAMMA_DEFAULT,
    IIDProcess,
    MarkovProcess,
    ProcessDistribution,
    _block_transition,
    _chain_marginal_vectors,
    exact_distance,
    stationary_of_blocks,
)

_MEMBERSHIP_DEPTH = 6
_MEMBERSHIP_TOL = 1e-12


class HypothesisSet(ABC):
    """A set of processes supporting minimization of the empirical distance."""

    alphabet: Alphabet

    @property
    @abstractmethod
    def tolerance(self) -> float:
        """Declared optimization tolerance of the minimizer (0 when exact)."""

    @abstractmethod
    def min_empirical_distance(
        self, sample: Sample, depth: int
    ) -> tuple[DistanceValue, ProcessDistribution]:
        """Minimal empirical distance over the representation and its witness."""

    @abstractmethod
    def contains_process(self, process: ProcessDistribution) -> bool:
        """Whether the process belongs to the set's representation."""

    @abstractmethod
    def _representation_vectors(self, depth: int) -> list[np.ndarray]:
        """Stacked marginal vectors (one row per representative) per length."""


def _is_same_process(a: ProcessDistribution, b: ProcessDistribution) -> bool:
    if a is b:
        return True
    if a.alphabet != b.alphabet:
        return False
    return exact_distance(a, b, _MEMBERSHIP_DEPTH).value <= _MEMBERSHIP_TOL


class FiniteHypothesis(HypothesisSet):
    """An explicit nonempty list of processes; the minimum is exact."""

    def __init__(self, members):
        members = list(members)
        if not members:
            raise ValueError("hypothesis needs at least one member")
        alphabet = members[0].alphabet
        if any(m.alphabet != alphabet for m in members):
            raise ValueError("members must share one alphabet")
        self.alphabet = alphabet
        self.members = members

    @property
    def tolerance(self) -> float:
        return 0.0

    def min_empirical_distance(self, sample, depth):
        best = None
        witness = None
        for member in self.members:
            dist = empirical_distance(sample, member, depth)
            if best is None or dist.value < best.value:
                best, witness = dist, member
        return best, witness

    def contains_process(self, process):
        return any(_is_same_process(process, m) for m in self.members)

    def _representation_vectors(self, depth):
        return [
            np.stack([m.marginal_vector(length) for m in self.members])
            for length in range(1, depth + 1)
        ]


class BallHypothesis(HypothesisSet):
    """A distance ball around a center, represented by explicit members.

    Membership is certified at construction: a member is admitted only
    when its truncated distance to the center plus the truncation tail
    stays within the radius, so every representative provably lies in
    the ball.  The minimum is exact over the representation.
    """

    def __init__(
        self,
        center: ProcessDistribution,
        radius: float,
        members,
        certify_depth: int = 6,
    ):
        if radius <= 0:
            raise ValueError("radius must be positive")
        members = list(members)
        if not members:
            raise ValueError("ball representation needs at least one member")
        for idx, member in enumerate(members):
            cert = exact_distance(member, center, certify_depth)
            if not cert.certified_within(radius):
                raise ValueError(
                    f"member {idx} ({member.describe()}) not certified inside the ball: "
                    f"distance {cert.value:.6g} + tail {cert.tail_bound:.3g} > {radius}"
                )
        self.alphabet = center.alphabet
        self.center = center
        self.radius = float(radius)
        self.certify_depth = certify_depth
        self._finite = FiniteHypothesis(members)

    @property
    def members(self):
        return self._finite.members

    @property
    def tolerance(self) -> float:
        return 0.0

    def min_empirical_distance(self, sample, depth):
        return self._finite.min_empirical_distance(sample, depth)

    def contains_process(self, process):
        return self._finite.contains_process(process)

    def _representation_vectors(self, depth):
        return self._finite._representation_vectors(depth)


@dataclass(frozen=True)
class MinimizationResult:
    distance: DistanceValue
    witness: ProcessDistribution
    eta: float
    grid_value: float


class MarkovFamilyHypothesis(HypothesisSet):
    """All k-order Markov chains whose transition rows lie in a closed box.

    ``box[s][j]`` is the closed interval allowed for the probability of
    symbol j given block state s, for the first ``|A| - 1`` symbols; the
    last symbol's probability is the remainder and must stay above the
    ergodicity floor gamma.  Order 0 describes a family of i.i.d.
    sources.  Minimization is a deterministic grid scan at
    ``grid_resolution`` followed by coordinate pattern search.
    """

    def __init__(
        self,
        alphabet: Alphabet,
        order: int,
        box,
        gamma: float = GAMMA_DEFAULT,
        grid_resolution: float = 0.0625,
        refine_until: float = 1e-5,
    ):
        if order < 0:
            raise ValueError("order must be >= 0")
        self.alphabet = alphabet
        self.order = order
        self.gamma = float(gamma)
        self.grid_resolution = float(grid_resolution)
        self.refine_until = float(refine_until)
        m = alphabet.size
        n_states = m**order
        box = np.asarray(box, dtype=float)
        if order >= 1 and box.ndim == 2 and m == 2:
            box = box[:, None, :]
        if order == 0 and box.ndim == 2:
            box = box[None, :, :]
        if box.shape != (n_states, m - 1, 2):
            raise ValueError(
                f"box must give one [lo, hi] per state per free symbol: "
                f"expected shape {(n_states, m - 1, 2)}, got {box.shape}"
            )
        if (box[..., 0] > box[..., 1]).any():
            raise ValueError("box intervals must satisfy lo <= hi")
        if box.min() < gamma or box.max() > 1.0 - gamma:
            raise ValueError("box must lie within the gamma-interior of the simplex")
        self.box = box
        self._lo = box[..., 0].ravel()
        self._hi = box[..., 1].ravel()
        if not self._feasible(self._grid_candidates()).any():
            raise ValueError("parameter box empty after gamma-clipping")

    @property
    def tolerance(self) -> float:
        return self.refine_until

    @property
    def n_parameters(self) -> int:
        return self._lo.size

    def _grid_axes(self) -> list[np.ndarray]:
        # arange-based so that halving the resolution yields a superset grid
        axes = []
        for lo, hi in zip(self._lo, self._hi):
            steps = int(np.floor((hi - lo) / self.grid_resolution + 1e-12))
            points = lo + self.grid_resolution * np.arange(steps + 1)
            if hi - points[-1] > 1e-12:
                points = np.append(points, hi)
            axes.append(points)
        return axes

    def _grid_candidates(self) -> np.ndarray:
        axes = self._grid_axes()
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([g.ravel() for g in mesh], axis=-1)

    def _emissions(self, thetas: np.ndarray) -> np.ndarray:
        m = self.alphabet.size
        n_states = m**self.order
        rows = thetas.reshape(-1, n_states, m - 1)
        emit = np.empty((rows.shape[0], n_states, m))
        emit[:, :, : m - 1] = rows
        emit[:, :, m - 1] = 1.0 - rows.sum(axis=2)
        return emit

    def _feasible(self, thetas: np.ndarray) -> np.ndarray:
        emit = self._emissions(thetas)
        in_box = (thetas >= self._lo - 1e-12).all(axis=1) & (
            thetas <= self._hi + 1e-12
        ).all(axis=1)
        return in_box & (emit[:, :, -1] >= self.gamma - 1e-12).all(axis=1)

    def _marginal_vector_stack(self, thetas: np.ndarray, depth: int) -> list[np.ndarray]:
        emit = self._emissions(thetas)
        if self.order == 0:
            pi = np.ones((emit.shape[0], 1))
        else:
            pi = stationary_of_blocks(_block_transition(emit))
        return _chain_marginal_vectors(pi, emit, depth)

    def _distances(self, thetas: np.ndarray, freqs, weights) -> np.ndarray:
        values = np.zeros(thetas.shape[0])
        for chunk_start in range(0, thetas.shape[0], 4096):
            chunk = slice(chunk_start, chunk_start + 4096)
            vectors = self._marginal_vector_stack(thetas[chunk], len(freqs))
            acc = np.zeros(vectors[0].shape[0])
            for nu, w, p in zip(freqs, weights, vectors):
                acc += np.abs(p - nu[None, :]) @ w
            values[chunk] = acc
        return values

    def minimize(self, sample: Sample, depth: int) -> MinimizationResult:
        if sample.alphabet != self.alphabet:
            raise ValueError("sample alphabet does not match the family")
        enum = get_enumeration(self.alphabet, max(depth, 8))
        freqs = sample.frequency_vectors(depth)
        weights = [enum.weights_for_length(length) for length in range(1, depth + 1)]

        candidates = self._grid_candidates()
        feasible = self._feasible(candidates)
        if not feasible.any():
            raise ValueError("parameter box empty after gamma-clipping")
        candidates = candidates[feasible]
        values = self._distances(candidates, freqs, weights)
        best_idx = int(np.argmin(values))
        best_theta = candidates[best_idx]
        grid_value = float(values[best_idx])

        best_value = grid_value
        step = self.grid_resolution / 2.0
        n_params = self.n_parameters
        while step >= self.refine_until:
            moves = np.repeat(best_theta[None, :], 2 * n_params, axis=0)
            for j in range(n_params):
                moves[2 * j, j] = min(best_theta[j] + step, self._hi[j])
                moves[2 * j + 1, j] = max(best_theta[j] - step, self._lo[j])
            ok = self._feasible(moves)
            if ok.any():
                move_values = np.full(moves.shape[0], np.inf)
                move_values[ok] = self._distances(moves[ok], freqs, weights)
                move_best = int(np.argmin(move_values))
                if move_values[move_best] < best_value:
                    best_value = float(move_values[move_best])
                    best_theta = moves[move_best]
                    continue
            step /= 2.0

        witness = self._process_at(best_theta)
        dist = DistanceValue(
            value=best_value, tail_bound=enum.tail_mass(depth), depth=depth
        )
        eta = (grid_value - best_value) + max(step * 2, self.refine_until)
        return MinimizationResult(dist, witness, eta=eta, grid_value=grid_value)

    def _process_at(self, theta: np.ndarray) -> ProcessDistribution:
        emit = self._emissions(theta[None, :])[0]
        if self.order == 0:
            return IIDProcess(self.alphabet, emit[0])
        return MarkovProcess(self.alphabet, emit, gamma=self.gamma)

    def min_empirical_distance(self, sample, depth):
        result = self.minimize(sample, depth)
        return result.distance, result.witness

    def contains_process(self, process):
        if self.order == 0:
            if not isinstance(process, IIDProcess):
                return False
            theta = process.p[: self.alphabet.size - 1]
        else:
            if not isinstance(process, MarkovProcess) or process.order != self.order:
                return False
            theta = process.transition[:, : self.alphabet.size - 1].ravel()
        return bool(
            (theta >= self._lo - 1e-9).all() and (theta <= self._hi + 1e-9).all()
        )

    def _representation_vectors(self, depth):
        candidates = self._grid_candidates()
        candidates = candidates[self._feasible(candidates)]
        return self._marginal_vector_stack(candidates, depth)


def separation(h0: HypothesisSet, h1: HypothesisSet, depth: int) -> float:
    """Upper bound on the distance between two hypothesis sets.

    Minimizes the truncated distance over pairs drawn from the two
    representations (grid points for parametrized families), so the
    result upper-bounds the true separation only up to the grid
    resolution; diagnostic, never used by the test itself.
    """
    if h0.alphabet != h1.alphabet:
        raise ValueError("hypothesis sets live on different alphabets")
    enum = get_enumeration(h0.alphabet, max(depth, 8))
    left = h0._representation_vectors(depth)
    right = h1._representation_vectors(depth)
    total = np.zeros((left[0].shape[0], right[0].shape[0]))
    for length in range(1, depth + 1):
        w = enum.weights_for_length(length)
        diff = np.abs(left[length - 1][:, None, :] - right[length - 1][None, :, :])
        total += diff @ w
    return float(total.min())
