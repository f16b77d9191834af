"""Stationary process distributions with exact marginals and samplers.

Every process here exposes two faces of the same law: exact word
probabilities (``marginal`` / ``marginal_vector``) and a seeded sampler
producing finite realizations.  All samplers start from the stationary
law, so finite samples are stationary, not just asymptotically so.

Supported constructions: i.i.d. sources, k-order Markov chains with an
ergodicity floor on transition entries, finite mixtures of processes
(one component drawn per sequence), and a two-component switching
process driven by a hidden two-state chain, which approaches the
corresponding mixture as switching slows down.
"""

from __future__ import annotations

import bisect
import math
from abc import ABC, abstractmethod

import numpy as np

from .empirical import DistanceValue, Sample
from .enumeration import Alphabet, get_enumeration

GAMMA_DEFAULT = 1e-3

_ROW_SUM_TOL = 1e-9
_STATIONARY_TOL = 1e-12


def _order_from_states(n_states: int, alphabet_size: int) -> int:
    order = 0
    size = 1
    while size < n_states:
        size *= alphabet_size
        order += 1
    if size != n_states:
        raise ValueError(f"{n_states} states is not a power of alphabet size {alphabet_size}")
    return order


def _block_transition(emit: np.ndarray) -> np.ndarray:
    """Dense transition matrix of the block chain induced by per-state symbol
    emissions, where state (s, a) -> (s * m + a) mod S."""
    *batch, n_states, m = emit.shape
    blocks = np.zeros((*batch, n_states, n_states))
    for s in range(n_states):
        for a in range(m):
            blocks[..., s, (s * m + a) % n_states] += emit[..., s, a]
    return blocks


def stationary_of_blocks(blocks: np.ndarray, tol: float = _STATIONARY_TOL) -> np.ndarray:
    """Unique left fixed point pi of a (batched) stochastic matrix.

    Solves (I - P)^T pi = 0 with the normalization row appended; a
    singular system or a large residual means the fixed point is not
    unique, i.e. the chain is not ergodic.
    """
    n = blocks.shape[-1]
    system = np.swapaxes(np.eye(n) - blocks, -1, -2).copy()
    system[..., -1, :] = 1.0
    rhs = np.zeros(n)
    rhs[-1] = 1.0
    try:
        pi = np.linalg.solve(system, np.broadcast_to(rhs, blocks.shape[:-2] + (n,)).copy())
    except np.linalg.LinAlgError as exc:
        raise ValueError("transition matrix has no unique stationary distribution") from exc
    residual = np.abs(np.einsum("...i,...ij->...j", pi, blocks) - pi).max()
    if not np.isfinite(pi).all() or residual > tol:
        raise ValueError(
            f"stationary distribution residual {residual:.3e} exceeds {tol:.0e}; "
            "chain is likely not ergodic"
        )
    return np.clip(pi, 0.0, None) / np.clip(pi, 0.0, None).sum(axis=-1, keepdims=True)


def markov_stationary(transition, gamma: float = GAMMA_DEFAULT) -> np.ndarray:
    """Stationary distribution over length-k blocks of a k-order chain.

    ``transition`` has one row per block state (lexicographic order) and
    one column per next symbol.  Entries below the ergodicity floor
    ``gamma`` are rejected.
    """
    emit = np.asarray(transition, dtype=float)
    if emit.ndim != 2:
        raise ValueError("transition must be a 2-d matrix")
    n_states, m = emit.shape
    _order_from_states(n_states, m)
    if np.abs(emit.sum(axis=1) - 1.0).max() > _ROW_SUM_TOL:
        raise ValueError("transition rows must sum to 1")
    if emit.min() < gamma:
        raise ValueError(f"transition entries must be >= gamma={gamma}")
    return stationary_of_blocks(_block_transition(emit))


def _chain_marginal_vectors(pi: np.ndarray, emit: np.ndarray, depth: int) -> list[np.ndarray]:
    """Word-probability vectors for lengths 1..depth of a block chain.

    ``pi`` is the stationary distribution over m**k block states (k may
    be 0 for i.i.d. emissions) and ``emit`` the per-state symbol law.
    Supports leading batch dimensions on both arrays.
    """
    *batch, n_states, m = emit.shape
    order = _order_from_states(n_states, m)
    vectors: dict[int, np.ndarray] = {}
    for length in range(1, min(order, depth) + 1):
        vectors[length] = pi.reshape(*batch, m**length, -1).sum(axis=-1)
    prefix = pi if order >= 1 else np.ones((*batch, 1))
    length = order
    while length < depth:
        states = np.arange(prefix.shape[-1]) % n_states
        prefix = (prefix[..., :, None] * emit[..., states, :]).reshape(*batch, -1)
        length += 1
        vectors[length] = prefix
    return [vectors[length] for length in range(1, depth + 1)]


class ProcessDistribution(ABC):
    """A stationary process over a finite alphabet."""

    alphabet: Alphabet

    @abstractmethod
    def marginal_vector(self, length: int) -> np.ndarray:
        """Probabilities of every word of the given length, lex order."""

    @abstractmethod
    def sample(self, n: int, rng: np.random.Generator) -> Sample:
        """A stationary sample of length n, deterministic given rng state."""

    @abstractmethod
    def describe(self) -> str:
        """Deterministic short description (used in reports)."""

    def marginal(self, word) -> float:
        """Probability that the process emits the given word."""
        codes = self.alphabet.encode(word) if not isinstance(word, np.ndarray) else word
        if len(codes) == 0:
            return 1.0
        return float(self._marginal_codes(np.asarray(codes, dtype=np.int64)))

    def _marginal_codes(self, codes: np.ndarray) -> float:
        enum = get_enumeration(self.alphabet, max(len(codes), 8))
        return float(self.marginal_vector(len(codes))[enum.rank_of(codes)])

    def _mv_cache(self) -> dict[int, np.ndarray]:
        cache = getattr(self, "_marginal_cache", None)
        if cache is None:
            cache = {}
            self._marginal_cache = cache
        return cache


def _fmt(x: float) -> str:
    return format(float(x), ".12g")


class IIDProcess(ProcessDistribution):
    """Independent draws from a fixed symbol distribution."""

    def __init__(self, alphabet: Alphabet, p):
        p = np.asarray(p, dtype=float)
        if p.shape != (alphabet.size,):
            raise ValueError("p must have one entry per alphabet symbol")
        if p.min() < 0 or abs(p.sum() - 1.0) > _ROW_SUM_TOL:
            raise ValueError("p must be a probability vector")
        p = p / p.sum()
        p.flags.writeable = False
        self.alphabet = alphabet
        self.p = p

    def marginal_vector(self, length: int) -> np.ndarray:
        cache = self._mv_cache()
        if length not in cache:
            vectors = _chain_marginal_vectors(np.ones(1), self.p[None, :], length)
            for i, v in enumerate(vectors, start=1):
                cache.setdefault(i, v)
        return cache[length]

    def _marginal_codes(self, codes: np.ndarray) -> float:
        return float(np.prod(self.p[codes]))

    def sample(self, n: int, rng: np.random.Generator) -> Sample:
        return Sample(self.alphabet, rng.choice(self.alphabet.size, size=n, p=self.p))

    def describe(self) -> str:
        return "iid(" + ",".join(_fmt(x) for x in self.p) + ")"


class MarkovProcess(ProcessDistribution):
    """A k-order ergodic Markov chain started from its stationary law.

    One transition row per length-k block state (lexicographic); every
    entry must stay above the ergodicity floor gamma, which keeps the
    chain irreducible and aperiodic.
    """

    def __init__(self, alphabet: Alphabet, transition, gamma: float = GAMMA_DEFAULT):
        emit = np.array(transition, dtype=float)
        if emit.ndim != 2 or emit.shape[1] != alphabet.size:
            raise ValueError("transition must have one column per symbol")
        self.order = _order_from_states(emit.shape[0], alphabet.size)
        if self.order < 1:
            raise ValueError("use IIDProcess for order-0 sources")
        if np.abs(emit.sum(axis=1) - 1.0).max() > _ROW_SUM_TOL:
            raise ValueError("transition rows must sum to 1")
        if emit.min() < gamma:
            raise ValueError(f"transition entries must be >= gamma={gamma}")
        emit = emit / emit.sum(axis=1, keepdims=True)
        emit.flags.writeable = False
        self.alphabet = alphabet
        self.transition = emit
        self.gamma = gamma
        self.initial = stationary_of_blocks(_block_transition(emit))
        self._initial_cum = np.cumsum(self.initial)

    def marginal_vector(self, length: int) -> np.ndarray:
        cache = self._mv_cache()
        if length not in cache:
            vectors = _chain_marginal_vectors(self.initial, self.transition, length)
            for i, v in enumerate(vectors, start=1):
                cache.setdefault(i, v)
        return cache[length]

    def _marginal_codes(self, codes: np.ndarray) -> float:
        m = self.alphabet.size
        n_states = self.transition.shape[0]
        if len(codes) <= self.order:
            block = self.initial.reshape(m ** len(codes), -1)
            rank = 0
            for c in codes:
                rank = rank * m + int(c)
            return float(block[rank].sum())
        state = 0
        for c in codes[: self.order]:
            state = state * m + int(c)
        prob = float(self.initial[state])
        for c in codes[self.order :]:
            prob *= float(self.transition[state, int(c)])
            state = (state * m + int(c)) % n_states
        return prob

    def sample(self, n: int, rng: np.random.Generator) -> Sample:
        m = self.alphabet.size
        n_states = self.transition.shape[0]
        state = int(np.searchsorted(self._initial_cum, rng.random(), side="right"))
        state = min(state, n_states - 1)
        enum = get_enumeration(self.alphabet, max(self.order, 8))
        out = enum.unrank(state, self.order)[:n]
        if n <= self.order:
            return Sample(self.alphabet, np.array(out, dtype=np.int64))
        draws = rng.random(n - self.order).tolist()
        if m == 2:
            zero_prob = self.transition[:, 0].tolist()
            for u in draws:
                a = 0 if u < zero_prob[state] else 1
                out.append(a)
                state = (state * 2 + a) % n_states
        else:
            row_cums = [row.cumsum().tolist() for row in self.transition]
            for u in draws:
                a = bisect.bisect_right(row_cums[state], u)
                a = min(a, m - 1)
                out.append(a)
                state = (state * m + a) % n_states
        return Sample(self.alphabet, np.array(out, dtype=np.int64))

    def describe(self) -> str:
        rows = ";".join(",".join(_fmt(x) for x in row) for row in self.transition)
        return f"markov(order={self.order},rows=[{rows}])"


class FiniteMixture(ProcessDistribution):
    """Mixture of stationary processes: one component drawn per sequence.

    Stationary but in general not ergodic; single-sequence frequencies
    follow the drawn component, not the mixture marginals.
    """

    def __init__(self, components, weights):
        components = list(components)
        weights = np.asarray(weights, dtype=float)
        if not components:
            raise ValueError("mixture needs at least one component")
        if weights.shape != (len(components),):
            raise ValueError("one weight per component required")
        if weights.min() < 0 or abs(weights.sum() - 1.0) > _ROW_SUM_TOL:
            raise ValueError("weights must form a probability vector")
        alphabet = components[0].alphabet
        if any(c.alphabet != alphabet for c in components):
            raise ValueError("mixture components must share one alphabet")
        self.alphabet = alphabet
        self.components = components
        self.weights = weights / weights.sum()

    def marginal_vector(self, length: int) -> np.ndarray:
        cache = self._mv_cache()
        if length not in cache:
            acc = self.weights[0] * self.components[0].marginal_vector(length)
            for w, comp in zip(self.weights[1:], self.components[1:]):
                acc = acc + w * comp.marginal_vector(length)
            cache[length] = acc
        return cache[length]

    def _marginal_codes(self, codes: np.ndarray) -> float:
        return float(
            sum(w * c._marginal_codes(codes) for w, c in zip(self.weights, self.components))
        )

    def sample(self, n: int, rng: np.random.Generator) -> Sample:
        j = int(rng.choice(len(self.components), p=self.weights))
        return self.components[j].sample(n, rng)

    def describe(self) -> str:
        parts = ",".join(
            f"{_fmt(w)}*{c.describe()}" for w, c in zip(self.weights, self.components)
        )
        return f"mixture({parts})"


def _finite_state_view(process: ProcessDistribution):
    """(initial, emission, successor) triple of a process with finitely
    many hidden block states; only i.i.d. and Markov sources qualify."""
    m = process.alphabet.size
    if isinstance(process, IIDProcess):
        init = np.ones(1)
        emit = process.p[None, :]
        nxt = np.zeros((1, m), dtype=np.int64)
        return init, emit, nxt
    if isinstance(process, MarkovProcess):
        n_states = process.transition.shape[0]
        states = np.arange(n_states)[:, None]
        symbols = np.arange(m)[None, :]
        nxt = (states * m + symbols) % n_states
        return process.initial, process.transition, nxt
    raise TypeError(
        f"switching components must be IIDProcess or MarkovProcess, got {type(process).__name__}"
    )


class SwitchingProcess(ProcessDistribution):
    """Two independent component processes toggled by a hidden 2-state chain.

    The hidden chain has transition matrix [[1-p, p], [q, 1-q]] and runs
    from its stationary law (q/(p+q), p/(p+q)); the output copies the
    first component while the chain sits in its first state and the
    second component otherwise.  Ergodic for p, q in (0, 1), yet as
    p, q -> 0 at a fixed ratio it approaches the non-ergodic mixture of
    its components with weights (q, p)/(p+q).

    Exact marginals come from a forward dynamic program over the product
    of the hidden-chain state and both components' block states.
    """

    def __init__(
        self,
        component_x: ProcessDistribution,
        component_y: ProcessDistribution,
        p: float,
        q: float,
    ):
        if not (0.0 < p < 1.0 and 0.0 < q < 1.0):
            raise ValueError("switching probabilities must lie in (0, 1)")
        if component_x.alphabet != component_y.alphabet:
            raise ValueError("components must share one alphabet")
        self.alphabet = component_x.alphabet
        self.component_x = component_x
        self.component_y = component_y
        self.p = float(p)
        self.q = float(q)
        self.switch_stationary = np.array([q / (p + q), p / (p + q)])
        self._init_vec, self._transfer = self._build_transfer()

    def _build_transfer(self):
        m = self.alphabet.size
        init_x, emit_x, next_x = _finite_state_view(self.component_x)
        init_y, emit_y, next_y = _finite_state_view(self.component_y)
        sx, sy = init_x.size, init_y.size
        switch = np.array([[1.0 - self.p, self.p], [self.q, 1.0 - self.q]])
        joint = 2 * sx * sy
        transfer = np.zeros((m, joint, joint))
        for s in (0, 1):
            for ux in range(sx):
                for uy in range(sy):
                    j = (s * sx + ux) * sy + uy
                    for a in range(m):
                        if s == 0:
                            # component x emits the observed symbol; y advances hidden
                            for b in range(m):
                                weight = emit_x[ux, a] * emit_y[uy, b]
                                ux2, uy2 = next_x[ux, a], next_y[uy, b]
                                for s2 in (0, 1):
                                    j2 = (s2 * sx + ux2) * sy + uy2
                                    transfer[a, j, j2] += switch[s, s2] * weight
                        else:
                            for b in range(m):
                                weight = emit_y[uy, a] * emit_x[ux, b]
                                ux2, uy2 = next_x[ux, b], next_y[uy, a]
                                for s2 in (0, 1):
                                    j2 = (s2 * sx + ux2) * sy + uy2
                                    transfer[a, j, j2] += switch[s, s2] * weight
        init = np.kron(self.switch_stationary, np.kron(init_x, init_y))
        return init, transfer

    def marginal_vector(self, length: int) -> np.ndarray:
        cache = self._mv_cache()
        if length in cache:
            return cache[length]
        alphas = self._init_vec[None, :]
        for step in range(1, length + 1):
            alphas = np.einsum("pj,ajk->pak", alphas, self._transfer).reshape(
                -1, self._init_vec.size
            )
            cache.setdefault(step, alphas.sum(axis=1))
        return cache[length]

    def _marginal_codes(self, codes: np.ndarray) -> float:
        alpha = self._init_vec
        for c in codes:
            alpha = alpha @ self._transfer[int(c)]
        return float(alpha.sum())

    def sample(self, n: int, rng: np.random.Generator) -> Sample:
        states = np.empty(n, dtype=np.int64)
        state = int(rng.random() >= self.switch_stationary[0])
        pos = 0
        while pos < n:
            leave = self.p if state == 0 else self.q
            run = min(int(rng.geometric(leave)), n - pos)
            states[pos : pos + run] = state
            pos += run
            state = 1 - state
        x = self.component_x.sample(n, rng).codes
        y = self.component_y.sample(n, rng).codes
        return Sample(self.alphabet, np.where(states == 0, x, y))

    def describe(self) -> str:
        return (
            f"switching(p={_fmt(self.p)},q={_fmt(self.q)},"
            f"x={self.component_x.describe()},y={self.component_y.describe()})"
        )


def switching_marginal(process: SwitchingProcess, word) -> float:
    """Exact probability that the switching process emits the word."""
    return process.marginal(word)


def slow_switching_process(
    component_x: ProcessDistribution,
    component_y: ProcessDistribution,
    dwell: float,
    y_share: float,
) -> SwitchingProcess:
    """Switching process with a given expected dwell time in the x state
    whose long-run share of the y component equals y_share."""
    if dwell <= 1.0:
        raise ValueError("dwell must exceed 1")
    if not 0.0 < y_share < 1.0:
        raise ValueError("y_share must lie in (0, 1)")
    p = 1.0 / dwell
    q = p * (1.0 - y_share) / y_share
    if not q < 1.0:
        raise ValueError(f"y_share={y_share} needs q={q:.3g} < 1; use a larger dwell")
    return SwitchingProcess(component_x, component_y, p=p, q=q)


def limit_mixture(process: SwitchingProcess) -> FiniteMixture:
    """The two-component mixture the switching process approaches as its
    switching probabilities shrink at a fixed ratio."""
    return FiniteMixture(
        [process.component_x, process.component_y], process.switch_stationary
    )


def exact_distance(
    rho1: ProcessDistribution, rho2: ProcessDistribution, depth: int
) -> DistanceValue:
    """Distributional distance truncated at the given word depth.

    The value is the exact weighted sum over all words of length <=
    depth; the certified remainder equals the enumeration tail mass.
    """
    if rho1.alphabet != rho2.alphabet:
        raise ValueError("processes live on different alphabets")
    if depth < 1:
        raise ValueError("depth must be >= 1")
    enum = get_enumeration(rho1.alphabet, max(depth, 8))
    value = 0.0
    for length in range(1, depth + 1):
        weights = enum.weights_for_length(length)
        diff = np.abs(rho1.marginal_vector(length) - rho2.marginal_vector(length))
        value += float(weights @ diff)
    return DistanceValue(value=value, tail_bound=enum.tail_mass(depth), depth=depth)
