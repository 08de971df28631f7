"""
Exception hierarchy for the simulator package.
"""
from typing import Optional, Tuple


class InhomSSAError(Exception):
    """Base class for all errors raised by the simulator."""


class ModelDefinitionError(InhomSSAError):
    """A reaction network, propensity or bound provider is ill-formed."""


class ConfigError(InhomSSAError):
    """A configuration value is missing or invalid.

    Args:
        field_path: Dotted path of the offending field, e.g. ``"mlmc.target_sd"``.
        message: Human readable description of the problem.
    """

    def __init__(self, field_path: str, message: str):
        self.field_path = field_path
        super().__init__(f"{field_path}: {message}")


class SimulationError(InhomSSAError):
    """A path could not be generated.

    Args:
        message: Description of the failure.
        interval: Optional (t0, t1) time interval in which the failure occurred.
    """

    def __init__(self, message: str, interval: Optional[Tuple[float, float]] = None):
        self.interval = interval
        if interval is not None:
            message = f"{message} on [{interval[0]!r}, {interval[1]!r}]"
        super().__init__(message)


class BoundViolationError(SimulationError):
    """An evaluated propensity exceeded its certified upper bound.

    The thinned path would have the wrong law, so the run is aborted.
    """

    def __init__(self, channel: int, time: float, value: float, bound: float, label: str = ""):
        self.channel = channel
        self.time = time
        self.value = value
        self.bound = bound
        who = f" ({label})" if label else ""
        super().__init__(
            f"channel {channel}{who} propensity {value!r} exceeds certified bound {bound!r} at t={time!r}")


class CouplingContractError(InhomSSAError):
    """Inputs to a coupling violate its preconditions."""
