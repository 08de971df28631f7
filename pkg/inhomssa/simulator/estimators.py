"""
Monte Carlo estimators built on the simulators and couplings.

  * :func:`estimate_expectation` is direct Monte Carlo over one simulator.
  * :func:`estimate_sensitivity` averages centered difference quotients
    ``(f(X^{theta+h/2}) - f(X^{theta-h/2})) / h`` over coupled pairs.
  * :func:`estimate_mlmc` is the unbiased multilevel estimator
    ``E f(Z_l0) + sum_l E[f(Z_l) - f(Z_{l-1})] + E[f(X) - f(Z_L)]``.

Samples are drawn in fixed-size batches. Sample ``i`` of a term always uses
the stream ``(seed, term, i)`` and batches merge in index order, so the
result does not depend on how many worker threads ran them.
"""
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from .couplings import COUPLING_NAMES, couple
from .exact_sim import DEFAULT_TOLERANCE, simulate_extrande, simulate_hitting_time
from .exceptions import ConfigError
from .functionals import PathFunctional
from .network import ReactionNetwork
from .randomness import DrawCounter, sample_stream
from .tau_leap import couple_exact_tau, couple_tau_leap_pair, level_step, simulate_tau_leap

logger = logging.getLogger(__name__)

#: two-sided 95% normal quantile used for half widths
Z_SCORE = 1.96
PILOT_SAMPLES = 100
DEFAULT_BATCH_SIZE = 50
DEFAULT_MAX_SAMPLES = 10 ** 6
_MAX_ROUNDS = 50


class MomentAccumulator:
    """Running count, mean and centered second moment of vector samples.

    Merging uses the pairwise update for ``(n, mean, M2)``, which is
    associative up to rounding, so fixed merge order gives fixed results.
    """

    def __init__(self, size: int):
        self.count = 0
        self.mean = np.zeros(size)
        self.m2 = np.zeros(size)

    def add(self, values: np.ndarray) -> None:
        self.count += 1
        delta = values - self.mean
        self.mean = self.mean + delta / self.count
        self.m2 = self.m2 + delta * (values - self.mean)

    def merge(self, other: "MomentAccumulator") -> "MomentAccumulator":
        if other.count == 0:
            return self
        if self.count == 0:
            self.count, self.mean, self.m2 = other.count, other.mean.copy(), other.m2.copy()
            return self
        total = self.count + other.count
        delta = other.mean - self.mean
        self.mean = self.mean + delta * (other.count / total)
        self.m2 = self.m2 + other.m2 + delta * delta * (self.count * other.count / total)
        self.count = total
        return self

    @property
    def variance(self) -> np.ndarray:
        """Unbiased sample variance (zero below two samples)."""
        if self.count < 2:
            return np.zeros_like(self.m2)
        return self.m2 / (self.count - 1)


SampleFunction = Callable[[int], Tuple[np.ndarray, DrawCounter]]


@dataclass
class BatchOutcome:
    moments: MomentAccumulator
    cost: DrawCounter
    truncated: bool = False


def run_batches(sample: SampleFunction, size: int, start: int, count: int, workers: int = 1,
                batch_size: int = DEFAULT_BATCH_SIZE, deadline: Optional[float] = None) -> BatchOutcome:
    """Draw samples ``start .. start+count-1`` and merge them in index order.

    Args:
        sample: Maps a sample index to its values and draw counter.
        size: Length of the value vectors.
        start: First sample index.
        count: Number of samples.
        workers: Worker threads; 1 runs inline.
        batch_size: Samples per batch.
        deadline: Optional ``time.monotonic()`` value after which no new batch starts.
    """
    bounds = [(b, min(b + batch_size, start + count)) for b in range(start, start + count, batch_size)]

    def run(batch):
        if deadline is not None and time.monotonic() > deadline:
            return None
        moments = MomentAccumulator(size)
        cost = DrawCounter()
        for index in range(*batch):
            values, counter = sample(index)
            moments.add(values)
            cost.merge(counter)
        return moments, cost

    if workers > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            results = list(executor.map(run, bounds))
    else:
        results = []
        for batch in bounds:
            results.append(run(batch))
            if results[-1] is None:
                break
    outcome = BatchOutcome(MomentAccumulator(size), DrawCounter())
    for result in results:
        if result is None:
            outcome.truncated = True
            break
        outcome.moments.merge(result[0])
        outcome.cost.merge(result[1])
    return outcome


@dataclass
class LevelReport:
    """One term of a multilevel estimator."""
    name: str
    level: Optional[int]
    estimate: float
    variance: float
    samples: int
    cost: DrawCounter

    @property
    def estimator_variance(self) -> float:
        return self.variance / self.samples if self.samples else math.inf

    @property
    def half_width(self) -> float:
        return Z_SCORE * math.sqrt(self.estimator_variance)

    @property
    def cost_per_sample(self) -> float:
        return self.cost.total / self.samples if self.samples else 0.0


@dataclass
class EstimatorReport:
    """Point estimates with their uncertainty and cost.

    ``variance`` is the per-sample variance for single-level estimators;
    ``estimator_variance`` is the variance of the estimate itself
    (``variance / n``, or the sum over levels for MLMC).
    """
    kind: str
    quantities: Tuple[str, ...]
    estimate: np.ndarray
    variance: np.ndarray
    estimator_variance: np.ndarray
    samples: int
    cost: DrawCounter
    wall_seconds: float = 0.0
    levels: List[LevelReport] = field(default_factory=list)
    converged: bool = True
    truncated: bool = False

    @property
    def half_width(self) -> np.ndarray:
        return Z_SCORE * np.sqrt(self.estimator_variance)

    @property
    def standard_deviation(self) -> np.ndarray:
        return np.sqrt(self.estimator_variance)


def _report_from_moments(kind, quantities, outcome: BatchOutcome, wall, converged=True) -> EstimatorReport:
    moments = outcome.moments
    variance = moments.variance
    n = moments.count
    return EstimatorReport(
        kind=kind,
        quantities=tuple(quantities),
        estimate=moments.mean.copy(),
        variance=variance,
        estimator_variance=variance / n if n else np.full_like(variance, np.inf),
        samples=n,
        cost=outcome.cost,
        wall_seconds=wall,
        converged=converged,
        truncated=outcome.truncated,
    )


def _grow_to_target(sample, size, target_sd, workers, batch_size, max_samples, deadline):
    """Pilot, then resample until ``max(variance)/n <= target_sd**2`` or the budget runs out."""
    outcome = run_batches(sample, size, 0, min(PILOT_SAMPLES, max_samples), workers, batch_size, deadline)
    converged = False
    for _ in range(_MAX_ROUNDS):
        moments = outcome.moments
        worst = float(np.max(moments.variance)) if moments.count else math.inf
        if moments.count >= 2 and worst / moments.count <= target_sd ** 2:
            converged = True
            break
        if outcome.truncated or moments.count >= max_samples:
            break
        needed = min(max_samples, max(moments.count + 1, math.ceil(worst / target_sd ** 2)))
        extra = run_batches(sample, size, moments.count, needed - moments.count, workers, batch_size, deadline)
        outcome.moments.merge(extra.moments)
        outcome.cost.merge(extra.cost)
        outcome.truncated = extra.truncated
    return outcome, converged


def estimate_expectation(net: ReactionNetwork, x0, functional: PathFunctional, T: float, seed: int,
                         n: Optional[int] = None, target_sd: Optional[float] = None,
                         method: str = "extrande", workers: int = 1, batch_size: int = DEFAULT_BATCH_SIZE,
                         bound_window: Optional[float] = None, tol: float = DEFAULT_TOLERANCE,
                         tau_step: Optional[float] = None, exact_channels: Sequence[int] = (),
                         max_samples: int = DEFAULT_MAX_SAMPLES,
                         max_seconds: Optional[float] = None) -> EstimatorReport:
    """Direct Monte Carlo estimate of ``E f(X)``.

    Args:
        method: ``"extrande"``, ``"hitting-time"`` or ``"tau-leap"`` (needs ``tau_step``).
        n: Fixed sample count; otherwise ``target_sd`` drives a pilot-then-grow loop.
    """
    if (n is None) == (target_sd is None):
        raise ConfigError("simulate.n", "give exactly one of a sample count or a target standard deviation")
    if method == "tau-leap" and tau_step is None:
        raise ConfigError("simulate.tau_step", "tau-leap needs a step")

    def sample(index):
        s = sample_stream(seed, f"expectation:{method}", index)
        if method == "extrande":
            path = simulate_extrande(net, x0, T, s, bound_window)
        elif method == "hitting-time":
            path = simulate_hitting_time(net, x0, T, s, tol)
        elif method == "tau-leap":
            path = simulate_tau_leap(net, x0, T, tau_step, s, exact_channels, bound_window)
        else:
            raise ConfigError("simulate.method", f"unknown method {method!r}")
        return functional(path), s.counter

    started = time.perf_counter()
    deadline = time.monotonic() + max_seconds if max_seconds else None
    if n is not None:
        outcome = run_batches(sample, functional.size, 0, n, workers, batch_size, deadline)
        converged = not outcome.truncated
    else:
        outcome, converged = _grow_to_target(sample, functional.size, target_sd, workers, batch_size,
                                             max_samples, deadline)
    report = _report_from_moments("expectation", functional.labels, outcome, time.perf_counter() - started,
                                  converged)
    logger.info("Direct %s estimate over %d paths, %d random variables",
                method, report.samples, report.cost.total)
    return report


@dataclass(frozen=True)
class SensitivityJob:
    """Centered finite-difference sensitivity of ``E f`` with respect to one parameter.

    Args:
        family: Maps a parameter value to a network.
        theta: Nominal parameter value.
        h: Perturbation; the pair runs at ``theta + h/2`` and ``theta - h/2``.
        functional: Path functional.
        coupling: ``independent``, ``crn``, ``thinning`` or ``stacked``.
        n: Number of coupled pairs.
        T: Horizon.
        x0: Initial state of both components.
        parameter: Parameter name used in quantity labels.
        bound_window: Certification window.
        max_seconds: Optional wall-time budget.
        target_sd: When set, pairs are added past a pilot until the largest
            standard deviation of the estimate is below it; ``n`` is then unused.
        max_samples: Pair budget of the ``target_sd`` loop.
    """
    family: Callable[[float], ReactionNetwork]
    theta: float
    h: float
    functional: PathFunctional
    coupling: str
    n: int
    T: float
    x0: Sequence[int]
    parameter: str = "theta"
    bound_window: Optional[float] = None
    max_seconds: Optional[float] = None
    target_sd: Optional[float] = None
    max_samples: int = DEFAULT_MAX_SAMPLES

    def __post_init__(self):
        if not self.h > 0:
            raise ConfigError("sensitivity.h", f"perturbation must be positive, got {self.h!r}")
        if self.n < 1:
            raise ConfigError("sensitivity.n", f"need at least one pair, got {self.n!r}")
        if self.target_sd is not None and not self.target_sd > 0:
            raise ConfigError("sensitivity.target_sd",
                              f"target standard deviation must be positive, got {self.target_sd!r}")
        if self.coupling not in COUPLING_NAMES and self.coupling not in COUPLING_NAMES.values():
            raise ConfigError("sensitivity.coupling",
                              f"unknown coupling {self.coupling!r}; expected one of {', '.join(COUPLING_NAMES)}")


def estimate_sensitivity(job: SensitivityJob, seed: int, workers: int = 1,
                         batch_size: int = DEFAULT_BATCH_SIZE) -> EstimatorReport:
    """Mean and variance of ``(f(X^{theta+h/2}) - f(X^{theta-h/2})) / h`` over ``job.n`` pairs,
    or over as many pairs as ``job.target_sd`` needs."""
    net_plus = job.family(job.theta + 0.5 * job.h)
    net_minus = job.family(job.theta - 0.5 * job.h)

    def sample(index):
        s = sample_stream(seed, "sensitivity", index)
        pair = couple(job.coupling, net_plus, net_minus, job.x0, job.x0, job.T, s, job.bound_window)
        return (job.functional(pair.path_x) - job.functional(pair.path_z)) / job.h, s.counter

    started = time.perf_counter()
    deadline = time.monotonic() + job.max_seconds if job.max_seconds else None
    if job.target_sd is None:
        outcome = run_batches(sample, job.functional.size, 0, job.n, workers, batch_size, deadline)
        converged = not outcome.truncated
    else:
        outcome, converged = _grow_to_target(sample, job.functional.size, job.target_sd, workers, batch_size,
                                             job.max_samples, deadline)
    quantities = [f"d{label}/d{job.parameter}" for label in job.functional.labels]
    report = _report_from_moments("sensitivity", quantities, outcome, time.perf_counter() - started,
                                  converged=converged)
    if outcome.truncated:
        logger.warning("Sensitivity run stopped by its time budget after %d pairs", report.samples)
    elif not converged:
        logger.warning("Sensitivity run reached its budget of %d pairs before the target SD", job.max_samples)
    logger.info("Sensitivity (%s coupling) over %d pairs, %d random variables",
                job.coupling, report.samples, report.cost.total)
    return report


@dataclass(frozen=True)
class MlmcConfig:
    """Multilevel configuration; ``h_l = T * M**-l``.

    Args:
        M: Refinement factor between consecutive levels.
        ell0: Coarsest level.
        L: Finest tau-leap level.
        T: Horizon.
        target_sd: Target standard deviation of the combined estimator.
        exact_channels: Channels simulated exactly inside tau-leap steps.
        exact_level: Add the unbiasing term ``E[f(X) - f(Z_L)]``.
        pilot: Pilot samples per term.
        max_samples: Per-term sample budget.
        bound_window: Certification window of the exact parts.
        max_seconds: Optional wall-time budget.
    """
    M: int
    ell0: int
    L: int
    T: float
    target_sd: float
    exact_channels: Tuple[int, ...] = ()
    exact_level: bool = True
    pilot: int = PILOT_SAMPLES
    max_samples: int = DEFAULT_MAX_SAMPLES
    bound_window: Optional[float] = None
    max_seconds: Optional[float] = None

    def __post_init__(self):
        if self.M < 2:
            raise ConfigError("mlmc.M", f"refinement factor must be at least 2, got {self.M!r}")
        if not 0 <= self.ell0 <= self.L:
            raise ConfigError("mlmc.levels", f"need 0 <= ell0 <= L, got {self.ell0!r} and {self.L!r}")
        if not self.T > 0:
            raise ConfigError("mlmc.T", f"horizon must be positive, got {self.T!r}")
        if not self.target_sd > 0:
            raise ConfigError("mlmc.target_sd", f"target standard deviation must be positive, got {self.target_sd!r}")
        if self.pilot < 2:
            raise ConfigError("mlmc.pilot", "pilot needs at least two samples")

    def step(self, level: int) -> float:
        return level_step(self.T, self.M, level)


@dataclass
class _Term:
    name: str
    level: Optional[int]
    sample: SampleFunction
    outcome: BatchOutcome = None

    @property
    def count(self) -> int:
        return self.outcome.moments.count

    @property
    def variance(self) -> float:
        return float(self.outcome.moments.variance[0])

    @property
    def cost_per_sample(self) -> float:
        # a term that drew nothing still costs its bookkeeping
        return max(self.outcome.cost.total / self.count, 1.0) if self.count else 1.0


def _mlmc_terms(net, x0, functional, cfg: MlmcConfig, seed) -> List[_Term]:
    channels = tuple(cfg.exact_channels)

    def base(index):
        s = sample_stream(seed, "mlmc:base", index)
        path = simulate_tau_leap(net, x0, cfg.T, cfg.step(cfg.ell0), s, channels, cfg.bound_window)
        return functional(path), s.counter

    def correction(level):
        def sample(index):
            s = sample_stream(seed, f"mlmc:level:{level}", index)
            pair = couple_tau_leap_pair(net, x0, cfg.T, level, cfg.M, s, channels, cfg.bound_window)
            return functional(pair.path_x) - functional(pair.path_z), s.counter
        return sample

    def exact(index):
        s = sample_stream(seed, "mlmc:exact", index)
        pair = couple_exact_tau(net, x0, cfg.T, cfg.L, cfg.M, s, channels, cfg.bound_window)
        return functional(pair.path_x) - functional(pair.path_z), s.counter

    terms = [_Term("base", cfg.ell0, base)]
    terms += [_Term(f"level {level}", level, correction(level)) for level in range(cfg.ell0 + 1, cfg.L + 1)]
    if cfg.exact_level:
        terms.append(_Term("exact", None, exact))
    return terms


def estimate_mlmc(net: ReactionNetwork, x0, functional: PathFunctional, cfg: MlmcConfig, seed: int,
                  workers: int = 1, batch_size: int = DEFAULT_BATCH_SIZE) -> EstimatorReport:
    """Multilevel estimate of ``E f(X(T))`` to a target standard deviation.

    Every term runs a pilot; then ``n_l`` is set proportional to
    ``sqrt(V_l / C_l)`` with ``C_l`` the random variables drawn per sample,
    scaled so that ``sum V_l / n_l <= target_sd**2``, until that holds or a
    budget is exhausted (the report is then flagged unconverged).

    Raises:
        ValueError: The functional is not scalar.
    """
    if functional.size != 1:
        raise ValueError("the multilevel estimator needs a scalar functional")
    started = time.perf_counter()
    deadline = time.monotonic() + cfg.max_seconds if cfg.max_seconds else None
    terms = _mlmc_terms(net, x0, functional, cfg, seed)
    for term in terms:
        term.outcome = run_batches(term.sample, 1, 0, cfg.pilot, workers, batch_size, deadline)

    epsilon2 = cfg.target_sd ** 2
    converged = False
    truncated = any(term.outcome.truncated for term in terms)
    for round_index in range(_MAX_ROUNDS):
        estimator_variance = math.fsum(term.variance / term.count for term in terms if term.count)
        logger.info("MLMC round %d: estimator sd %.4g (target %.4g), samples %s", round_index,
                    math.sqrt(estimator_variance), cfg.target_sd, [term.count for term in terms])
        if estimator_variance <= epsilon2 and all(term.count >= 2 for term in terms):
            converged = True
            break
        if truncated:
            break
        scale = math.fsum(math.sqrt(term.variance * term.cost_per_sample) for term in terms) / epsilon2
        extras = []
        for term in terms:
            optimal = math.ceil(scale * math.sqrt(term.variance / term.cost_per_sample))
            extras.append(max(0, min(optimal, cfg.max_samples) - term.count))
        if not any(extras):
            break
        for term, extra in zip(terms, extras):
            if extra:
                more = run_batches(term.sample, 1, term.count, extra, workers, batch_size, deadline)
                term.outcome.moments.merge(more.moments)
                term.outcome.cost.merge(more.cost)
                truncated = truncated or more.truncated
    if not converged:
        logger.warning("MLMC stopped before reaching target sd %.4g", cfg.target_sd)

    levels = [
        LevelReport(term.name, term.level, float(term.outcome.moments.mean[0]), term.variance, term.count,
                    term.outcome.cost)
        for term in terms
    ]
    cost = DrawCounter()
    for level in levels:
        cost.merge(level.cost)
    estimator_variance = math.fsum(level.estimator_variance for level in levels)
    return EstimatorReport(
        kind="mlmc",
        quantities=tuple(functional.labels),
        estimate=np.array([math.fsum(level.estimate for level in levels)]),
        variance=np.array([estimator_variance]),
        estimator_variance=np.array([estimator_variance]),
        samples=sum(level.samples for level in levels),
        cost=cost,
        wall_seconds=time.perf_counter() - started,
        levels=levels,
        converged=converged,
        truncated=truncated,
    )
