"""
Thinning engines shared by the exact simulators, the couplings and the
tau-leap corrector.

A process component owns one state and knows how to certify bounds for a
subset of channels, evaluate single-channel rates, and apply a firing. The
engines below drive one or two components with one random stream:

  * :func:`run_extrande` thins one component against the sum of its bounds.
  * :func:`run_thinning` thins two components against the larger of their
    bound totals with one shared uniform.
  * :func:`run_stacked` stacks per-channel strips of height
    ``max(bound_x, bound_z)`` so simultaneous firings share the channel.

Every engine re-certifies after each candidate event and at each escape time.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .exceptions import BoundViolationError, ModelDefinitionError
from .network import COUNT_LIMIT, PER_CHANNEL, ReactionNetwork, apply_change, certify_bound, make_state
from .randomness import RandomStream
from .trajectory import LEAP, PathRecorder, TrajectoryPath

logger = logging.getLogger(__name__)

# Relative slack allowed between an evaluated rate and its certificate
BOUND_RTOL = 1e-9
GRID_TOLERANCE = 1e-12

EventLog = List[Tuple[float, Optional[int], Optional[int]]]


@dataclass
class SimulationStats:
    """Counters filled by the thinning engines.

    ``candidate_weight[k-1]`` accumulates the share ``bound_k / bound_total`` of
    every candidate event and ``slack_weight[k-1]`` the share
    ``(bound_k - rate_k) / bound_total``, so their ratio is the fraction of
    channel k's candidates that ended as phantoms.
    """
    channel_count: int
    candidates: int = 0
    accepted: int = 0
    phantoms: int = 0
    escapes: int = 0
    candidate_weight: np.ndarray = field(default=None)
    slack_weight: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.candidate_weight is None:
            self.candidate_weight = np.zeros(self.channel_count)
        if self.slack_weight is None:
            self.slack_weight = np.zeros(self.channel_count)

    def slack_fraction(self, channel: int) -> float:
        weight = self.candidate_weight[channel - 1]
        return float(self.slack_weight[channel - 1] / weight) if weight else 0.0

    @property
    def phantom_fraction(self) -> float:
        return self.phantoms / self.candidates if self.candidates else 0.0

    def merge(self, other: "SimulationStats") -> "SimulationStats":
        self.candidates += other.candidates
        self.accepted += other.accepted
        self.phantoms += other.phantoms
        self.escapes += other.escapes
        self.candidate_weight += other.candidate_weight
        self.slack_weight += other.slack_weight
        return self


def _check_rate(process, channel: int, t: float, value: float, bound: float) -> None:
    if value > bound + BOUND_RTOL * max(1.0, bound):
        raise BoundViolationError(channel, t, value, bound, process.net.channel_label(channel))


class ExactProcess:
    """A process simulated exactly: live propensities at the current state.

    Args:
        net: Network with any environment already bound.
        x0: Initial state.
        t_end: Horizon.
        bound_window: Certification window length; None certifies up to ``t_end``.
    """

    def __init__(self, net: ReactionNetwork, x0, t_end: float, bound_window: Optional[float] = None):
        if bound_window is not None and bound_window <= 0:
            raise ModelDefinitionError(f"bound window must be positive, got {bound_window!r}")
        self.net = net
        self.state = make_state(x0, net.species_count)
        self.t_end = float(t_end)
        self.bound_window = bound_window
        self.recorder = PathRecorder(self.state)
        self._propensities = [channel.propensity for channel in net.channels]
        self._changes = list(net.change_matrix)

    def window_end(self, t: float) -> float:
        if self.bound_window is None:
            return self.t_end
        return min(t + self.bound_window, self.t_end)

    def certify(self, t: float, channels: Sequence[int]) -> Tuple[List[float], float]:
        """Per-channel bounds on ``[t, escape]`` and the common escape time."""
        certificates = certify_bound(self.net, t, self.window_end(t), self.state, PER_CHANNEL, channels)
        return [c.bound_value for c in certificates], min(c.escape_time for c in certificates)

    def rate(self, t: float, channel: int) -> float:
        value = self._propensities[channel - 1].evaluate(t, self.state)
        if value < 0 or value != value:
            raise ModelDefinitionError(
                f"channel {channel} ({self.net.channel_label(channel)}) evaluated to {value!r} at t={t!r}")
        return value

    def rates(self, t: float, channels: Sequence[int]) -> List[float]:
        return [self.rate(t, k) for k in channels]

    def fire(self, t: float, channel: int) -> None:
        self.state = apply_change(self.state, self._changes[channel - 1])
        self.recorder.record(t, channel, self.state)

    def reach(self, t: float) -> None:
        """Called whenever an engine advances to an escape time."""

    def path(self) -> TrajectoryPath:
        return self.recorder.build(self.t_end)


class SteppedProcess(ExactProcess):
    """A tau-leap process on the grid ``t_n = n * step``.

    Euler channels run at rates frozen at the start of each step; their
    firings are held back and applied at the step end. Channels in
    ``exact_channels`` use live rates at the visible state (step-start state
    plus exact jumps so far) and update it immediately.

    Args:
        net: Network with any environment already bound.
        x0: Initial state.
        t_end: Horizon, an integer multiple of ``step``.
        step: Step length.
        exact_channels: 1-based channels simulated exactly.
        bound_window: Certification window for the exact channels.
    """

    def __init__(self, net: ReactionNetwork, x0, t_end: float, step: float,
                 exact_channels: Sequence[int] = (), bound_window: Optional[float] = None):
        super().__init__(net, x0, t_end, bound_window)
        if step <= 0:
            raise ModelDefinitionError(f"tau-leap step must be positive, got {step!r}")
        steps = int(round(t_end / step))
        if steps < 1 or not math.isclose(steps * step, t_end, rel_tol=1e-9):
            raise ModelDefinitionError(f"tau-leap step {step!r} does not divide the horizon {t_end!r}")
        for k in exact_channels:
            if not 1 <= k <= net.channel_count:
                raise ModelDefinitionError(f"exact channel {k} out of range 1..{net.channel_count}")
        self.step = float(step)
        self.step_count = steps
        self.exact_channels = tuple(sorted(set(exact_channels)))
        self.euler_channels = tuple(k for k in range(1, net.channel_count + 1) if k not in self.exact_channels)
        self._is_exact = [False] + [k in self.exact_channels for k in range(1, net.channel_count + 1)]
        self.step_index = 0
        self.pending = np.zeros(net.species_count, dtype=np.int64)
        self.clipped_steps = 0
        self.frozen: List[float] = []
        self._freeze()

    @property
    def step_end(self) -> float:
        return self.t_end * (self.step_index + 1) / self.step_count

    @property
    def step_start(self) -> float:
        return self.t_end * self.step_index / self.step_count

    def _freeze(self) -> None:
        t = self.step_start
        self.frozen = [ExactProcess.rate(self, t, k) for k in range(1, self.net.channel_count + 1)]

    def certify(self, t: float, channels: Sequence[int]) -> Tuple[List[float], float]:
        t1 = min(self.window_end(t), self.step_end)
        exact = [k for k in channels if self._is_exact[k]]
        certificates = iter(certify_bound(self.net, t, t1, self.state, PER_CHANNEL, exact) if exact else ())
        bounds = []
        escape = t1
        for k in channels:
            if self._is_exact[k]:
                value, channel_escape = next(certificates)
                escape = min(escape, channel_escape)
                bounds.append(value)
            else:
                bounds.append(self.frozen[k - 1])
        return bounds, escape

    def rate(self, t: float, channel: int) -> float:
        if not self._is_exact[channel]:
            return self.frozen[channel - 1]
        return super().rate(t, channel)

    def fire(self, t: float, channel: int) -> None:
        if self._is_exact[channel]:
            super().fire(t, channel)
        else:
            self.pending += self._changes[channel - 1]

    def add_counts(self, channel: int, count: int) -> None:
        """Queue ``count`` firings of an Euler channel for the step end."""
        if count:
            self.pending += count * self._changes[channel - 1]

    def reach(self, t: float) -> None:
        # grids of different step counts may place the same boundary an ulp apart
        if self.step_index < self.step_count and t >= self.step_end - GRID_TOLERANCE * self.t_end:
            self.flush()

    def flush(self) -> None:
        """Apply the held-back Euler updates at the current step end."""
        t = self.step_end
        if self.pending.any():
            updated = self.state + self.pending
            if updated.min() < 0:
                self.clipped_steps += 1
                logger.warning("Tau-leap step ending at t=%r drove %s negative; clipping to zero",
                               t, [self.net.species[i] for i in np.flatnonzero(updated < 0)])
                updated = np.maximum(updated, 0)
            if updated.max() >= COUNT_LIMIT:
                raise ModelDefinitionError(f"species count overflow in state {updated.tolist()}")
            self.state = updated
            self.recorder.record(t, LEAP, self.state)
            self.pending = np.zeros_like(self.pending)
        self.step_index += 1
        if self.step_index < self.step_count:
            self._freeze()


def _select(values: Sequence[float], u: float) -> Optional[int]:
    """Index ``i`` with ``q_{i-1} <= u < q_i`` over the running sums; None past the end."""
    cumulative = 0.0
    for i, value in enumerate(values):
        cumulative += value
        if u < cumulative:
            return i
    return None


def _record_candidate(stats: SimulationStats, channels, bounds, rates, total) -> None:
    stats.candidates += 1
    for k, bound, rate in zip(channels, bounds, rates):
        stats.candidate_weight[k - 1] += bound / total
        stats.slack_weight[k - 1] += (bound - rate) / total


def run_extrande(process: ExactProcess, t0: float, t_end: float, stream: RandomStream,
                 channels: Sequence[int], stats: Optional[SimulationStats] = None) -> float:
    """Thin ``channels`` of one process on ``[t0, t_end]``; returns ``t_end``."""
    t = t0
    while t < t_end:
        bounds, escape = process.certify(t, channels)
        escape = min(escape, t_end)
        total = math.fsum(bounds)
        if total <= 0.0:
            t = escape
            process.reach(t)
            continue
        t_next = t + stream.draw_unit_exponential() / total
        if t_next >= escape:
            if escape < t_end and stats is not None:
                stats.escapes += 1
            t = escape
            process.reach(t)
            continue
        t = t_next
        rates = process.rates(t, channels)
        for k, rate, bound in zip(channels, rates, bounds):
            _check_rate(process, k, t, rate, bound)
        chosen = _select(rates, stream.draw_uniform() * total)
        if stats is not None:
            _record_candidate(stats, channels, bounds, rates, total)
            if chosen is None:
                stats.phantoms += 1
            else:
                stats.accepted += 1
        if chosen is not None:
            process.fire(t, channels[chosen])
    return t_end


def run_thinning(px: ExactProcess, pz: ExactProcess, t_end: float, stream: RandomStream,
                 log: Optional[EventLog] = None, stats: Optional[SimulationStats] = None) -> None:
    """Couple two processes through one candidate stream and one shared uniform per candidate."""
    channels = range(1, px.net.channel_count + 1)
    t = 0.0
    while t < t_end:
        bounds_x, escape_x = px.certify(t, channels)
        bounds_z, escape_z = pz.certify(t, channels)
        escape = min(escape_x, escape_z, t_end)
        joint = max(math.fsum(bounds_x), math.fsum(bounds_z))
        if joint <= 0.0:
            t = escape
            continue
        t_next = t + stream.draw_unit_exponential() / joint
        if t_next >= escape:
            if escape < t_end and stats is not None:
                stats.escapes += 1
            t = escape
            continue
        t = t_next
        rates_x = px.rates(t, channels)
        rates_z = pz.rates(t, channels)
        for k in channels:
            _check_rate(px, k, t, rates_x[k - 1], bounds_x[k - 1])
            _check_rate(pz, k, t, rates_z[k - 1], bounds_z[k - 1])
        u = stream.draw_uniform() * joint
        chosen_x = _select(rates_x, u)
        chosen_z = _select(rates_z, u)
        if stats is not None:
            stats.candidates += 1
            if chosen_x is None and chosen_z is None:
                stats.phantoms += 1
            else:
                stats.accepted += 1
        channel_x = None if chosen_x is None else chosen_x + 1
        channel_z = None if chosen_z is None else chosen_z + 1
        if channel_x is not None:
            px.fire(t, channel_x)
        if channel_z is not None:
            pz.fire(t, channel_z)
        if log is not None and (channel_x is not None or channel_z is not None):
            log.append((t, channel_x, channel_z))


def run_stacked(px: ExactProcess, pz: ExactProcess, t0: float, t_end: float, stream: RandomStream,
                channels: Sequence[int], log: Optional[EventLog] = None,
                stats: Optional[SimulationStats] = None) -> None:
    """Stacked coupling of ``channels`` on ``[t0, t_end]``.

    A candidate landing at offset ``o`` inside the strip of channel ``k``
    fires X iff ``o < rate_x_k`` and Z iff ``o < rate_z_k``.
    """
    t = t0
    while t < t_end:
        bounds_x, escape_x = px.certify(t, channels)
        bounds_z, escape_z = pz.certify(t, channels)
        escape = min(escape_x, escape_z, t_end)
        strips = [max(a, b) for a, b in zip(bounds_x, bounds_z)]
        total = math.fsum(strips)
        if total <= 0.0:
            t = escape
            px.reach(t)
            pz.reach(t)
            continue
        t_next = t + stream.draw_unit_exponential() / total
        if t_next >= escape:
            if escape < t_end and stats is not None:
                stats.escapes += 1
            t = escape
            px.reach(t)
            pz.reach(t)
            continue
        t = t_next
        u = stream.draw_uniform() * total
        lower = 0.0
        strip = None
        for i, height in enumerate(strips):
            if height > 0.0:
                if u < lower + height:
                    strip = i
                    break
                lower += height
        if strip is None:
            # u rounded past the last running sum
            strip = max(i for i, height in enumerate(strips) if height > 0.0)
            lower -= strips[strip]
        k = channels[strip]
        offset = u - lower
        rate_x = px.rate(t, k)
        rate_z = pz.rate(t, k)
        _check_rate(px, k, t, rate_x, bounds_x[strip])
        _check_rate(pz, k, t, rate_z, bounds_z[strip])
        fire_x = offset < rate_x
        fire_z = offset < rate_z
        if stats is not None:
            stats.candidates += 1
            if fire_x or fire_z:
                stats.accepted += 1
            else:
                stats.phantoms += 1
        if fire_x:
            px.fire(t, k)
        if fire_z:
            pz.fire(t, k)
        if log is not None and (fire_x or fire_z):
            log.append((t, k if fire_x else None, k if fire_z else None))
