"""
Time profiles for reaction rate constants.

A rate profile is a nonnegative function of time together with an exact (or
conservative) supremum over any window. Propensities multiply a profile by a
state-dependent factor, so the supremum of the profile on a window is all the
bound certification needs.
"""
import math
from typing import Sequence

from .exceptions import ModelDefinitionError


class RateFunction:
    """Base class for time-dependent rate constants."""

    #: True when the value does not depend on time.
    time_independent = False

    def __call__(self, t: float) -> float:
        raise NotImplementedError

    def sup(self, t0: float, t1: float) -> float:
        """Upper bound of the rate over ``[t0, t1]``."""
        raise NotImplementedError

    @property
    def needs_environment(self) -> bool:
        return False

    def bind_environment(self, environment_path) -> "RateFunction":
        """Return a copy whose modulated parts follow ``environment_path``."""
        return self


class ConstantRate(RateFunction):
    """A rate that never changes."""

    time_independent = True

    def __init__(self, value: float):
        if value < 0 or not math.isfinite(value):
            raise ModelDefinitionError(f"constant rate must be finite and nonnegative, got {value!r}")
        self.value = float(value)

    def __call__(self, t: float) -> float:
        return self.value

    def sup(self, t0: float, t1: float) -> float:
        return self.value

    def __repr__(self):
        return f"ConstantRate({self.value!r})"


class SinusoidalRate(RateFunction):
    """``base + amplitude * sin(2*pi*(t - phase)/period)``.

    The supremum over a window is exact: it is ``base + |amplitude|`` when the
    window contains a crest, otherwise the larger endpoint value.
    """

    def __init__(self, base: float, amplitude: float, period: float = 24.0, phase: float = 0.0):
        if period <= 0:
            raise ModelDefinitionError(f"sinusoid period must be positive, got {period!r}")
        if base < abs(amplitude):
            raise ModelDefinitionError(
                f"sinusoid base {base!r} smaller than |amplitude| {abs(amplitude)!r} gives negative rates")
        self.base = float(base)
        self.amplitude = float(amplitude)
        self.period = float(period)
        self.phase = float(phase)
        self._omega = 2.0 * math.pi / self.period

    def __call__(self, t: float) -> float:
        return self.base + self.amplitude * math.sin(self._omega * (t - self.phase))

    def sup(self, t0: float, t1: float) -> float:
        peak = self.base + abs(self.amplitude)
        if self.amplitude == 0.0 or t1 - t0 >= self.period:
            return peak
        # Crest of amplitude*sin sits at angle pi/2 (amplitude > 0) or 3pi/2 (amplitude < 0)
        crest = 0.5 * math.pi if self.amplitude > 0 else 1.5 * math.pi
        angle0 = self._omega * (t0 - self.phase)
        n = math.ceil((angle0 - crest) / (2.0 * math.pi))
        t_crest = self.phase + (crest + 2.0 * math.pi * n) / self._omega
        if t_crest <= t1:
            return peak
        return max(self(t0), self(t1))

    def __repr__(self):
        return (f"SinusoidalRate(base={self.base!r}, amplitude={self.amplitude!r}, "
                f"period={self.period!r}, phase={self.phase!r})")


class ModulatedRate(RateFunction):
    """``scale * k(t)`` where ``k`` is the state of a Markov-modulated environment.

    Unbound instances only know the environment's level set; they must be bound
    to a realized environment path before evaluation. The bound uses the largest
    level, so it holds for every realization.
    """

    def __init__(self, scale: float, levels: Sequence[float]):
        if scale < 0:
            raise ModelDefinitionError(f"modulated rate scale must be nonnegative, got {scale!r}")
        if not levels or min(levels) < 0:
            raise ModelDefinitionError("modulated rate needs a nonempty set of nonnegative levels")
        self.scale = float(scale)
        self.levels = tuple(float(v) for v in levels)

    @property
    def needs_environment(self) -> bool:
        return True

    def __call__(self, t: float) -> float:
        raise ModelDefinitionError("modulated rate evaluated before an environment path was bound")

    def sup(self, t0: float, t1: float) -> float:
        return self.scale * max(self.levels)

    def bind_environment(self, environment_path) -> RateFunction:
        return EnvironmentRate(self.scale, environment_path, self.sup(0.0, 0.0))

    def __repr__(self):
        return f"ModulatedRate(scale={self.scale!r}, levels={self.levels!r})"


class EnvironmentRate(RateFunction):
    """A modulated rate frozen to one realized environment path."""

    def __init__(self, scale: float, environment_path, global_sup: float):
        self.scale = scale
        self.environment_path = environment_path
        self.global_sup = global_sup

    def __call__(self, t: float) -> float:
        return self.scale * self.environment_path.value_at(t)

    def sup(self, t0: float, t1: float) -> float:
        return self.global_sup
