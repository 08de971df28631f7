"""
Exact single-path simulation.

:func:`simulate_extrande` is the production path. :func:`simulate_hitting_time`
solves the integrated-intensity equation numerically and serves as the
reference the thinning simulators are checked against.
"""
import logging
import math
import warnings
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate, optimize

from .exceptions import ModelDefinitionError, SimulationError
from .network import EnvironmentModel, ReactionNetwork, apply_change, channel_propensities, make_state
from .processes import ExactProcess, SimulationStats, run_extrande
from .randomness import RandomStream
from .trajectory import EnvironmentPath, PathRecorder, TrajectoryPath

logger = logging.getLogger(__name__)

DEFAULT_TOLERANCE = 1e-10
# Interval doublings tried before the hitting-time bracket gives up
_MAX_DOUBLINGS = 200
# quad rejects relative tolerances near machine precision
_QUAD_RTOL = 1e-12


def simulate_environment(spec: EnvironmentModel, T: float, s: RandomStream) -> EnvironmentPath:
    """Markov-modulated environment on ``[0, T]``.

    Holding times are exponential with rate ``spec.holding_rate``; the next
    level is drawn from the embedded chain's row with one uniform.
    """
    index = spec.initial_index
    values = [spec.levels[index]]
    switch_times = []
    if len(spec.levels) == 1:
        return EnvironmentPath((), tuple(values), float(T))
    t = 0.0
    while True:
        t += s.draw_unit_exponential() / spec.holding_rate
        if t > T:
            break
        u = s.draw_uniform()
        row = spec.transition[index]
        cumulative = 0.0
        for j, p in enumerate(row):
            cumulative += p
            if u < cumulative:
                index = j
                break
        else:
            index = max(j for j, p in enumerate(row) if p > 0)
        switch_times.append(t)
        values.append(spec.levels[index])
    return EnvironmentPath(tuple(switch_times), tuple(values), float(T))


def bind_network(net: ReactionNetwork, T: float, s: RandomStream,
                 environment: Optional[EnvironmentPath] = None) -> ReactionNetwork:
    """Bind modulated rates to ``environment``, drawing one from ``s.child("environment")`` if absent."""
    if not net.needs_environment:
        return net
    if environment is None:
        environment = simulate_environment(net.environment, T, s.child("environment"))
    return net.bind_environment(environment)


def simulate_extrande(net: ReactionNetwork, x0, T: float, s: RandomStream,
                      bound_window: Optional[float] = None,
                      environment: Optional[EnvironmentPath] = None,
                      stats: Optional[SimulationStats] = None) -> TrajectoryPath:
    """Extrande: thinning against a total bound refreshed after every candidate.

    Args:
        net: The network; modulated rates are bound to ``environment``.
        x0: Initial state.
        T: Horizon.
        s: Random stream.
        bound_window: Certification window; None certifies up to ``T``. Escapes
            at the window end re-certify without changing the state.
        environment: Realized environment for modulated rates.
        stats: Optional counters to fill.

    Raises:
        BoundViolationError: An evaluated propensity exceeded its certificate.
    """
    if T <= 0:
        raise ModelDefinitionError(f"horizon must be positive, got {T!r}")
    net = bind_network(net, T, s, environment)
    process = ExactProcess(net, x0, T, bound_window)
    run_extrande(process, 0.0, float(T), s, range(1, net.channel_count + 1), stats)
    path = process.path()
    if stats is not None:
        logger.debug("Extrande run: %d jumps, %d candidates, %d phantoms, %d escapes",
                     path.jump_count, stats.candidates, stats.phantoms, stats.escapes)
    return path


def _integral(rate: Callable[[float], float], a: float, b: float, tol: float,
              breakpoints: Sequence[float]) -> float:
    points = [p for p in breakpoints if a < p < b]
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            value, _ = integrate.quad(rate, a, b, epsabs=tol / 10.0, epsrel=_QUAD_RTOL, limit=200,
                                      points=points or None)
        except integrate.IntegrationWarning as e:
            raise SimulationError(f"quadrature did not converge: {e}", (a, b)) from None
    return value


def solve_hitting_time(rate: Callable[[float], float], t0: float, target: float, t_max: float,
                       tol: float = DEFAULT_TOLERANCE, breakpoints: Sequence[float] = ()) -> Optional[float]:
    """Smallest ``delta`` with ``integral_{t0}^{t0+delta} rate = target``.

    The bracket starts at ``target / rate(t0)`` and doubles until the integral
    passes the target; brentq then refines the root to ``tol``.

    Returns:
        ``delta``, or None when the integral up to ``t_max`` stays below the target.
    """
    if tol <= 0:
        raise ValueError(f"tolerance must be positive, got {tol!r}")

    def excess(u):
        return _integral(rate, t0, u, tol, breakpoints) - target

    start = rate(t0)
    guess = target / start if start > 0 else (t_max - t0) / 64.0
    lo, hi = t0, min(t0 + guess, t_max)
    for _ in range(_MAX_DOUBLINGS):
        value = excess(hi)
        if value >= 0:
            break
        if hi >= t_max:
            return None
        lo, hi = hi, min(t0 + 2.0 * (hi - t0), t_max)
    else:
        raise SimulationError("could not bracket the hitting time", (t0, t_max))
    if value == 0:
        return hi - t0
    root = optimize.brentq(excess, lo, hi, xtol=tol, rtol=4 * np.finfo(float).eps)
    return root - t0


def simulate_hitting_time(net: ReactionNetwork, x0, T: float, s: RandomStream,
                          tol: float = DEFAULT_TOLERANCE,
                          environment: Optional[EnvironmentPath] = None) -> TrajectoryPath:
    """Reference simulator: next jump where the integrated total intensity reaches a unit exponential.

    The channel is chosen in proportion to the propensities at the jump time.

    Raises:
        SimulationError: The quadrature failed; the error carries the interval.
    """
    if tol <= 0:
        raise ModelDefinitionError(f"hitting-time tolerance must be positive, got {tol!r}")
    environment_path = environment
    if net.needs_environment and environment_path is None:
        environment_path = simulate_environment(net.environment, T, s.child("environment"))
    net = bind_network(net, T, s, environment_path)
    breakpoints = tuple(environment_path.switch_times) if environment_path is not None else ()
    x = make_state(x0, net.species_count)
    recorder = PathRecorder(x)
    t = 0.0
    while t < T:
        state = x

        def total(u, state=state):
            return math.fsum(channel_propensities(net, u, state))

        delta = solve_hitting_time(total, t, s.draw_unit_exponential(), T, tol, breakpoints)
        if delta is None:
            break
        t += delta
        if t > T:
            break
        rates = channel_propensities(net, t, x)
        u = s.draw_uniform() * math.fsum(rates)
        cumulative = 0.0
        chosen = None
        for i, rate in enumerate(rates):
            cumulative += rate
            if u < cumulative:
                chosen = i
                break
        if chosen is None:
            positive = [i for i, rate in enumerate(rates) if rate > 0]
            if not positive:
                continue
            chosen = positive[-1]
        x = apply_change(x, net.change_matrix[chosen])
        recorder.record(t, chosen + 1, x)
    return recorder.build(T)
