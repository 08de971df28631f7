"""
Seasonal birth pulses for the SIR catalog model.
"""
import math

from scipy import special

from .exceptions import ModelDefinitionError
from .rates import RateFunction

# I_0 overflows double precision a little above 700
_I0_ARGUMENT_LIMIT = 700.0


def bessel_i0(z: float) -> float:
    """Modified Bessel function of the first kind of order zero.

    Args:
        z: Finite argument with ``|z| <= 700``.

    Returns:
        ``I_0(z) = (1/pi) * integral_0^pi exp(z cos x) dx``.
    """
    if not math.isfinite(z):
        raise ValueError(f"bessel_i0 needs a finite argument, got {z!r}")
    if abs(z) > _I0_ARGUMENT_LIMIT:
        raise OverflowError(f"bessel_i0 argument {z!r} exceeds {_I0_ARGUMENT_LIMIT}")
    return float(special.i0(z))


def pulse_scale(m: float, s: float) -> float:
    """Normalizing constant ``k = m e^{s/2} / I_0(s/2)``.

    Computed as ``m / i0e(s/2)`` which stays finite for large synchrony.
    """
    return m / float(special.i0e(0.5 * s))


def birth_pulse_rate(t: float, m: float, s: float, phi: float) -> float:
    """Birth pulse ``B(t) = k exp(-s cos(pi t - phi)^2)``.

    The one-period average of ``B`` equals the death rate ``m``.

    Args:
        t: Time in years.
        m: Death rate, m > 0.
        s: Synchrony, s >= 0; larger values give narrower pulses.
        phi: Phase of the pulse.
    """
    if m <= 0 or s < 0:
        raise ModelDefinitionError(f"birth pulse needs m > 0 and s >= 0, got m={m!r}, s={s!r}")
    return pulse_scale(m, s) * math.exp(-s * math.cos(math.pi * t - phi) ** 2)


class BirthPulseRate(RateFunction):
    """Rate profile form of :func:`birth_pulse_rate`.

    Either ``m`` (normalized pulse) or an explicit scale ``k`` is given.
    """

    def __init__(self, s: float, phi: float = 0.0, m: float = None, k: float = None):
        if (m is None) == (k is None):
            raise ModelDefinitionError("birth pulse needs exactly one of m or k")
        if s < 0:
            raise ModelDefinitionError(f"birth pulse synchrony must be nonnegative, got {s!r}")
        if m is not None and m <= 0:
            raise ModelDefinitionError(f"birth pulse death rate must be positive, got {m!r}")
        self.s = float(s)
        self.phi = float(phi)
        self.k = pulse_scale(m, s) if m is not None else float(k)
        if self.k < 0:
            raise ModelDefinitionError(f"birth pulse scale must be nonnegative, got {self.k!r}")

    def __call__(self, t: float) -> float:
        return self.k * math.exp(-self.s * math.cos(math.pi * t - self.phi) ** 2)

    def sup(self, t0: float, t1: float) -> float:
        # Peak where cos(pi t - phi) = 0, i.e. pi t - phi = pi/2 + n pi
        u0 = math.pi * t0 - self.phi
        u1 = math.pi * t1 - self.phi
        n = math.ceil((u0 - 0.5 * math.pi) / math.pi)
        if 0.5 * math.pi + n * math.pi <= u1:
            return self.k
        return max(self(t0), self(t1))

    def __repr__(self):
        return f"BirthPulseRate(k={self.k!r}, s={self.s!r}, phi={self.phi!r})"
