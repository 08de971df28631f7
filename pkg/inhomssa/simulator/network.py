"""
Reaction networks: species, channels and propensity evaluation.

Channels are numbered 1..K in every public interface; the phantom channel
K+1 only exists inside the thinning simulators.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .exceptions import ModelDefinitionError
from .propensity import BoundCertificate, PropensitySpec

logger = logging.getLogger(__name__)

PER_CHANNEL = "per-channel"
TOTAL = "total"

# Largest count accepted before an update is treated as int64 overflow
COUNT_LIMIT = 2 ** 62


def make_state(counts: Sequence[int], species_count: Optional[int] = None) -> np.ndarray:
    """Validate counts and return them as an int64 state vector."""
    state = np.array(counts, dtype=np.int64)
    if state.ndim != 1:
        raise ModelDefinitionError(f"state must be a vector, got shape {state.shape}")
    if species_count is not None and state.shape[0] != species_count:
        raise ModelDefinitionError(f"state has {state.shape[0]} entries, network has {species_count} species")
    if np.any(state < 0):
        raise ModelDefinitionError(f"state has negative counts: {state.tolist()}")
    return state


def apply_change(x: np.ndarray, change: np.ndarray) -> np.ndarray:
    """Return ``x + change``, refusing negative or overflowing counts."""
    updated = x + change
    if updated.min() < 0:
        raise ModelDefinitionError(
            f"reaction drove the state negative: {x.tolist()} + {change.tolist()}")
    if updated.max() >= COUNT_LIMIT:
        raise ModelDefinitionError(f"species count overflow in state {updated.tolist()}")
    return updated


@dataclass(frozen=True)
class ReactionChannel:
    """One reaction channel: state change vector and propensity."""
    change_vector: Tuple[int, ...]
    propensity: PropensitySpec
    label: str = ""


@dataclass(frozen=True)
class EnvironmentModel:
    """Markov-modulated environment driving ``modulated`` rates.

    Args:
        levels: State space of the environment (modulation values).
        transition: Embedded-chain transition matrix, zero diagonal, rows sum to 1.
        initial_index: Index into ``levels`` of the starting value.
        holding_rate: Rate of the exponential holding times.
    """
    levels: Tuple[float, ...]
    transition: Tuple[Tuple[float, ...], ...]
    initial_index: int = 0
    holding_rate: float = 1.0

    def __post_init__(self):
        n = len(self.levels)
        if n == 0:
            raise ModelDefinitionError("environment needs at least one level")
        if len(self.transition) != n or any(len(row) != n for row in self.transition):
            raise ModelDefinitionError(f"environment transition matrix must be {n}x{n}")
        if not 0 <= self.initial_index < n:
            raise ModelDefinitionError(f"environment initial index {self.initial_index} out of range")
        if self.holding_rate <= 0:
            raise ModelDefinitionError("environment holding rate must be positive")
        if n > 1:
            for i, row in enumerate(self.transition):
                if row[i] != 0:
                    raise ModelDefinitionError(f"environment transition row {i} has a nonzero diagonal")
                if any(p < 0 for p in row) or not math.isclose(sum(row), 1.0, rel_tol=0, abs_tol=1e-12):
                    raise ModelDefinitionError(f"environment transition row {i} is not a distribution")

    @property
    def initial_value(self) -> float:
        return self.levels[self.initial_index]


@dataclass(frozen=True)
class ReactionNetwork:
    """A reaction network with ``d`` species and ``K >= 1`` channels.

    Networks are immutable and can be shared across sampler threads.
    """
    species: Tuple[str, ...]
    channels: Tuple[ReactionChannel, ...]
    environment: Optional[EnvironmentModel] = None
    name: str = ""
    change_matrix: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.species:
            raise ModelDefinitionError("network needs at least one species")
        if not self.channels:
            raise ModelDefinitionError("network needs at least one channel")
        d = len(self.species)
        for k, channel in enumerate(self.channels, start=1):
            if len(channel.change_vector) != d:
                raise ModelDefinitionError(
                    f"channel {k} change vector has {len(channel.change_vector)} entries, expected {d}")
        if self.needs_environment and self.environment is None:
            raise ModelDefinitionError("network has modulated rates but no environment model")
        matrix = np.array([channel.change_vector for channel in self.channels], dtype=np.int64)
        matrix.setflags(write=False)
        object.__setattr__(self, "change_matrix", matrix)

    @property
    def species_count(self) -> int:
        return len(self.species)

    @property
    def channel_count(self) -> int:
        return len(self.channels)

    @property
    def needs_environment(self) -> bool:
        return any(channel.propensity.needs_environment for channel in self.channels)

    def species_index(self, name_or_index) -> int:
        """Resolve a species name, or a 0-based index, to an index."""
        if isinstance(name_or_index, (int, np.integer)):
            if not 0 <= name_or_index < self.species_count:
                raise ModelDefinitionError(f"species index {name_or_index} out of range")
            return int(name_or_index)
        try:
            return self.species.index(name_or_index)
        except ValueError:
            raise ModelDefinitionError(
                f"unknown species {name_or_index!r}; known: {', '.join(self.species)}") from None

    def channel_label(self, k: int) -> str:
        """Label of 1-based channel ``k``."""
        label = self.channels[k - 1].label
        return label or f"R{k}"

    def bind_environment(self, environment_path) -> "ReactionNetwork":
        """Freeze modulated rates to a realized environment path."""
        if not self.needs_environment:
            return self
        channels = tuple(
            ReactionChannel(c.change_vector, c.propensity.bind_environment(environment_path), c.label)
            for c in self.channels)
        return ReactionNetwork(self.species, channels, self.environment, self.name)


def channel_propensities(net: ReactionNetwork, t: float, x: np.ndarray) -> List[float]:
    """Evaluate every channel at ``(t, x)``, rejecting negative rates."""
    values = []
    for k, channel in enumerate(net.channels, start=1):
        value = channel.propensity.evaluate(t, x)
        if value < 0 or value != value:
            raise ModelDefinitionError(
                f"channel {k} ({net.channel_label(k)}) evaluated to {value!r} at t={t!r}, x={x.tolist()}")
        values.append(value)
    return values


def total_propensity(net: ReactionNetwork, t: float, x: np.ndarray) -> float:
    """``lambda_0(t, x)``: the sum of all channel propensities (no phantom channel)."""
    return math.fsum(channel_propensities(net, t, x))


def certify_bound(net: ReactionNetwork, t0: float, t1: float, x: np.ndarray,
                  mode: str = PER_CHANNEL, channels: Optional[Sequence[int]] = None) -> List[BoundCertificate]:
    """Certify upper bounds for the propensities on ``[t0, t1]`` at frozen state ``x``.

    Args:
        net: The network.
        t0: Window start.
        t1: Window end, ``t1 > t0``.
        x: State, held fixed over the window.
        mode: ``"per-channel"`` for one certificate per channel, ``"total"`` for a
            single certificate bounding ``lambda_0``.
        channels: Optional 1-based subset of channels to certify (per-channel mode).

    Returns:
        List of certificates; in total mode its escape time is the earliest
        per-channel escape.
    """
    if not t0 < t1:
        raise ModelDefinitionError(f"bound window must satisfy t0 < t1, got [{t0!r}, {t1!r}]")
    indices = channels if channels is not None else range(1, net.channel_count + 1)
    certificates = []
    for k in indices:
        try:
            certificate = net.channels[k - 1].propensity.bound(t0, t1, x)
        except ModelDefinitionError:
            raise
        except Exception as e:
            raise ModelDefinitionError(f"bound provider of channel {k} ({net.channel_label(k)}) failed: {e}") from e
        value, escape = certificate
        if value < 0 or value != value or not t0 < escape <= t1:
            raise ModelDefinitionError(
                f"channel {k} ({net.channel_label(k)}) returned an invalid certificate {certificate!r} "
                f"for window [{t0!r}, {t1!r}]")
        certificates.append(certificate)
    if mode == PER_CHANNEL:
        return certificates
    if mode == TOTAL:
        return [BoundCertificate(math.fsum(c.bound_value for c in certificates),
                                 min(c.escape_time for c in certificates))]
    raise ValueError(f"unknown certification mode {mode!r}")
