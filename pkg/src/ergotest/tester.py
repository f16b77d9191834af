"""The uniform distance test and its Monte Carlo evaluation harness.

The binary test compares the empirical distance from a sample to each of
two hypothesis sets and picks the closer one, with ties going to the
alternative.  The harness measures error rates of that rule over seeded
trials: per-sample-size consistency curves, convergence tables of the
distance estimator, prefix-deviation inequality checks, and a
demonstration that slow-switching generators inside a distance ball keep
the worst-case error bounded away from zero at any sample size.

Every trial draws from a dedicated RNG stream keyed by (experiment,
generator, size, trial), so results are bit-identical regardless of how
many workers execute them.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .empirical import DistanceValue, Sample, empirical_distance
from .enumeration import get_enumeration
from .hypotheses import BallHypothesis, FiniteHypothesis, HypothesisSet
from .processes import ProcessDistribution, exact_distance, slow_switching_process

# fixed stream ids: one per experiment kind, never reused
_SID_TEST = 0
_SID_CURVE = 1
_SID_CONVERGENCE = 2
_SID_DEVIATION = 3
_SID_FLOOR = 4
_SID_SAMPLE = 5

_Z95 = 1.959963984540054


def stream_rng(master_seed: int, *key: int) -> np.random.Generator:
    """Dedicated generator for one task, independent of execution order."""
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=key))


def sample_rng(master_seed: int, index: int = 0) -> np.random.Generator:
    """Stream used by the standalone sample-generation command."""
    return stream_rng(master_seed, _SID_SAMPLE, index)


def _halfwidth(rate: float, trials: int) -> float:
    return _Z95 * float(np.sqrt(rate * (1.0 - rate) / trials))


@dataclass(frozen=True)
class TestVerdict:
    """Outcome of the uniform test: 0 means closer to the null set."""

    decision: int
    d0: DistanceValue
    d1: DistanceValue
    witness0: ProcessDistribution
    witness1: ProcessDistribution


def uniform_test(
    sample: Sample, h0: HypothesisSet, h1: HypothesisSet, depth: int
) -> TestVerdict:
    """Decide 0 iff the sample is strictly closer to h0 than to h1."""
    d0, w0 = h0.min_empirical_distance(sample, depth)
    d1, w1 = h1.min_empirical_distance(sample, depth)
    decision = 0 if d0.value < d1.value else 1
    return TestVerdict(decision=decision, d0=d0, d1=d1, witness0=w0, witness1=w1)


@dataclass(frozen=True)
class ConsistencyCell:
    generator: str
    label: int
    n: int
    trials: int
    errors: int

    @property
    def error_rate(self) -> float:
        return self.errors / self.trials

    @property
    def ci_halfwidth(self) -> float:
        return _halfwidth(self.error_rate, self.trials)


@dataclass(frozen=True)
class ConsistencyReport:
    cells: tuple[ConsistencyCell, ...]
    sizes: tuple[int, ...]
    trials: int
    depth: int
    seed: int
    alpha: float
    n_alpha: int | None

    def worst_error(self, n: int, label: int | None = None) -> float:
        rates = [
            c.error_rate
            for c in self.cells
            if c.n == n and (label is None or c.label == label)
        ]
        return max(rates) if rates else 0.0


def _curve_cell_worker(args):
    h0, h1, process, label, gen_idx, size_idx, n, trials, depth, seed, sid = args
    errors = 0
    for t in range(trials):
        rng = stream_rng(seed, sid, gen_idx, size_idx, t)
        x = process.sample(n, rng)
        verdict = uniform_test(x, h0, h1, depth)
        errors += int(verdict.decision != label)
    return errors


def _run_tasks(worker, tasks, threads: int):
    if threads <= 1 or len(tasks) <= 1:
        return [worker(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(worker, tasks))


def consistency_curve(
    h0: HypothesisSet,
    h1: HypothesisSet,
    generators,
    sizes,
    trials: int,
    depth: int,
    seed: int,
    alpha: float = 0.05,
    names=None,
    threads: int = 1,
    check_membership: bool = True,
    _sid: int = _SID_CURVE,
) -> ConsistencyReport:
    """Error rates of the uniform test per generator and sample size.

    ``generators`` is a list of (process, true label) pairs; each process
    must belong to the representation of the hypothesis set its label
    points at.  Runs ``trials`` independent seeded trials per cell.
    """
    generators = list(generators)
    sizes = [int(n) for n in sizes]
    if names is None:
        names = [f"generator_{i}" for i in range(len(generators))]
    hypotheses = {0: h0, 1: h1}
    for (process, label), name in zip(generators, names):
        if label not in (0, 1):
            raise ValueError(f"label of {name} must be 0 or 1")
        if check_membership and not hypotheses[label].contains_process(process):
            raise ValueError(
                f"generator {name} is not a representation member of H{label}"
            )
    tasks = [
        (h0, h1, process, label, gen_idx, size_idx, n, trials, depth, seed, _sid)
        for gen_idx, (process, label) in enumerate(generators)
        for size_idx, n in enumerate(sizes)
    ]
    error_counts = _run_tasks(_curve_cell_worker, tasks, threads)
    cells = []
    task_iter = iter(error_counts)
    for gen_idx, (process, label) in enumerate(generators):
        for n in sizes:
            cells.append(
                ConsistencyCell(
                    generator=names[gen_idx],
                    label=label,
                    n=n,
                    trials=trials,
                    errors=int(next(task_iter)),
                )
            )
    report = ConsistencyReport(
        cells=tuple(cells),
        sizes=tuple(sizes),
        trials=trials,
        depth=depth,
        seed=seed,
        alpha=alpha,
        n_alpha=None,
    )
    n_alpha = None
    labels_present = {label for _, label in generators}
    for n in sorted(sizes):
        if all(report.worst_error(n, label) <= alpha for label in labels_present):
            n_alpha = n
            break
    return ConsistencyReport(
        cells=report.cells,
        sizes=report.sizes,
        trials=trials,
        depth=depth,
        seed=seed,
        alpha=alpha,
        n_alpha=n_alpha,
    )


@dataclass(frozen=True)
class ConvergenceRow:
    n: int
    trials: int
    p95_abs_error: float
    mean_abs_error: float


@dataclass(frozen=True)
class ConvergenceReport:
    rows: tuple[ConvergenceRow, ...]
    exact_value: float
    depth: int
    seed: int


def _convergence_cell_worker(args):
    rho, xi, size_idx, n, trials, depth, seed, exact_value = args
    diffs = np.empty(trials)
    for t in range(trials):
        rng = stream_rng(seed, _SID_CONVERGENCE, size_idx, t)
        x = rho.sample(n, rng)
        diffs[t] = abs(empirical_distance(x, xi, depth).value - exact_value)
    return diffs


def convergence_table(
    rho: ProcessDistribution,
    xi: ProcessDistribution,
    sizes,
    trials: int,
    depth: int,
    seed: int,
    threads: int = 1,
) -> ConvergenceReport:
    """Distribution of |empirical - exact| distance along growing samples.

    The exact distance is truncated at the same depth as the empirical
    one, so the deviation reflects sampling error alone.
    """
    sizes = [int(n) for n in sizes]
    exact_value = exact_distance(rho, xi, depth).value
    tasks = [
        (rho, xi, size_idx, n, trials, depth, seed, exact_value)
        for size_idx, n in enumerate(sizes)
    ]
    results = _run_tasks(_convergence_cell_worker, tasks, threads)
    rows = tuple(
        ConvergenceRow(
            n=n,
            trials=trials,
            p95_abs_error=float(np.percentile(diffs, 95)),
            mean_abs_error=float(diffs.mean()),
        )
        for n, diffs in zip(sizes, results)
    )
    return ConvergenceReport(rows=rows, exact_value=exact_value, depth=depth, seed=seed)


@dataclass(frozen=True)
class DeviationCheck:
    """One Monte Carlo comparison of a full-sample tail probability against
    its prefix bound; 'violated' requires the confidence intervals to
    disagree outright."""

    m: int
    k: int
    epsilon: float
    side: str  # "ge": far-from-H tails, "le": close-to-H tails
    left_estimate: float
    left_halfwidth: float
    right_threshold: float
    right_estimate: float
    right_halfwidth: float
    verdict: str  # "satisfied" | "inconclusive" | "violated"


def _deviation_trials_worker(args):
    rho, hypothesis, m, k, depth, seed, t_start, t_stop = args
    d_m = np.empty(t_stop - t_start)
    d_k = np.empty(t_stop - t_start)
    for t in range(t_start, t_stop):
        rng = stream_rng(seed, _SID_DEVIATION, t)
        x = rho.sample(m, rng)
        prefix = Sample(x.alphabet, x.codes[:k])
        d_m[t - t_start] = hypothesis.min_empirical_distance(x, depth)[0].value
        d_k[t - t_start] = hypothesis.min_empirical_distance(prefix, depth)[0].value
    return d_m, d_k


def deviation_checks(
    rho: ProcessDistribution,
    hypothesis: HypothesisSet,
    m: int,
    k: int,
    epsilons,
    trials: int,
    depth: int,
    seed: int,
    threads: int = 1,
) -> list[DeviationCheck]:
    """Check that full-sample deviation probabilities are dominated by the
    corresponding prefix probabilities, for both tail directions.

    The prefix of each sampled sequence doubles as the short sample; its
    marginal law is the same by stationarity and the shared randomness
    tightens the comparison.
    """
    if not m > 2 * k > 1:
        raise ValueError(f"need m > 2k > 1, got m={m}, k={k}")
    enum = get_enumeration(rho.alphabet, max(depth, 8))
    tail_k = enum.tail_mass(k)
    shift = 2.0 * k / (m - k + 1.0)

    block = max(1, (trials + max(threads, 1) * 4 - 1) // (max(threads, 1) * 4))
    bounds = list(range(0, trials, block)) + [trials]
    tasks = [
        (rho, hypothesis, m, k, depth, seed, lo, hi)
        for lo, hi in zip(bounds[:-1], bounds[1:])
        if hi > lo
    ]
    results = _run_tasks(_deviation_trials_worker, tasks, threads)
    d_m = np.concatenate([r[0] for r in results])
    d_k = np.concatenate([r[1] for r in results])

    def estimate(values: np.ndarray) -> tuple[float, float]:
        rate = float(values.mean())
        return rate, _halfwidth(rate, trials)

    checks = []
    for epsilon in epsilons:
        epsilon = float(epsilon)
        for side in ("ge", "le"):
            if side == "ge":
                threshold = epsilon - shift - tail_k
                left, left_hw = estimate(d_m >= epsilon)
                right, right_hw = estimate(d_k >= threshold)
            else:
                threshold = m * epsilon / (m - k + 1.0) + shift
                left, left_hw = estimate(d_m <= epsilon)
                right, right_hw = estimate(d_k <= threshold)
            if left - left_hw > right + right_hw:
                verdict = "violated"
            elif left <= right:
                verdict = "satisfied"
            else:
                verdict = "inconclusive"
            checks.append(
                DeviationCheck(
                    m=m,
                    k=k,
                    epsilon=epsilon,
                    side=side,
                    left_estimate=left,
                    left_halfwidth=left_hw,
                    right_threshold=threshold,
                    right_estimate=right,
                    right_halfwidth=right_hw,
                    verdict=verdict,
                )
            )
    return checks


@dataclass(frozen=True)
class MemberCertificate:
    name: str
    dwell: float | None
    certified_value: float
    certified_tail: float
    admitted: bool


@dataclass(frozen=True)
class FloorReport:
    """Worst-case error of the uniform test against ball members built from
    progressively slower switching processes."""

    curve: ConsistencyReport
    certificates: tuple[MemberCertificate, ...]
    epsilon: float
    delta: float
    center_distance: float
    worst_alternative_error: dict[int, float] = field(default_factory=dict)

    def worst_alternative_ci_lower(self, n: int) -> float:
        cells = [c for c in self.curve.cells if c.n == n and c.label == 1]
        if not cells:
            return 0.0
        best = max(cells, key=lambda c: c.error_rate)
        return best.error_rate - best.ci_halfwidth


def impossibility_study(
    rho: ProcessDistribution,
    nu: ProcessDistribution,
    epsilon: float,
    delta: float,
    dwell_times,
    sizes,
    trials: int,
    depth: int,
    seed: int,
    alpha: float = 0.05,
    certify_depth: int = 6,
    threads: int = 1,
) -> FloorReport:
    """Error floor of testing {rho} against a ball around nu.

    Builds switching processes that spend a delta share of time in rho
    and the rest in nu; members whose certified distance to nu stays
    within epsilon join the ball's representation and serve as
    adversarial generators.  With dwell times beyond the sample size
    the sample is indistinguishable from a pure-component run, so the
    worst-case error over these generators stays bounded away from 0.
    """
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    center_gap = exact_distance(rho, nu, certify_depth)
    if not center_gap.certified_above(epsilon):
        raise ValueError(
            f"rho and nu must be certifiably farther than epsilon={epsilon}: "
            f"distance {center_gap.value:.6g} - tail {center_gap.tail_bound:.3g} <= {epsilon}"
        )
    certificates = []
    members = [nu]
    generators = [(rho, 0)]
    names = ["rho"]
    for dwell in dwell_times:
        candidate = slow_switching_process(nu, rho, dwell=dwell, y_share=delta)
        cert = exact_distance(candidate, nu, certify_depth)
        admitted = cert.certified_within(epsilon)
        certificates.append(
            MemberCertificate(
                name=f"switching_dwell_{dwell:g}",
                dwell=float(dwell),
                certified_value=cert.value,
                certified_tail=cert.tail_bound,
                admitted=admitted,
            )
        )
        if admitted:
            members.append(candidate)
            generators.append((candidate, 1))
            names.append(f"switching_dwell_{dwell:g}")
    if len(members) == 1:
        raise ValueError("no switching member passed the ball certification")
    h0 = FiniteHypothesis([rho])
    h1 = BallHypothesis(nu, epsilon, members, certify_depth=certify_depth)
    curve = consistency_curve(
        h0,
        h1,
        generators,
        sizes,
        trials,
        depth,
        seed,
        alpha=alpha,
        names=names,
        threads=threads,
        _sid=_SID_FLOOR,
    )
    worst = {n: curve.worst_error(n, label=1) for n in curve.sizes}
    return FloorReport(
        curve=curve,
        certificates=tuple(certificates),
        epsilon=float(epsilon),
        delta=float(delta),
        center_distance=center_gap.value,
        worst_alternative_error=worst,
    )
