"""
Coupled path pairs ``(X, Z)`` for networks with the same reaction vectors.
"""
import logging
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from .exact_sim import bind_network, simulate_environment, simulate_extrande
from .exceptions import CouplingContractError
from .network import ReactionNetwork
from .processes import ExactProcess, SimulationStats, run_stacked, run_thinning
from .randomness import RandomStream
from .trajectory import EnvironmentPath, TrajectoryPath

logger = logging.getLogger(__name__)

INDEPENDENT = "independent"
EXTRANDE_CRN = "extrande_crn"
EXTRANDE_THINNING = "extrande_thinning"
STACKED = "stacked"
TAU_PAIR = "tau_pair"
EXACT_TAU = "exact_tau"

#: command-line names of the exact couplings
COUPLING_NAMES = {
    "independent": INDEPENDENT,
    "crn": EXTRANDE_CRN,
    "thinning": EXTRANDE_THINNING,
    "stacked": STACKED,
}


@dataclass(frozen=True)
class CoupledPair:
    """Two paths built from shared randomness.

    ``shared_event_log`` lists ``(time, channel_x, channel_z)`` for every
    candidate at which at least one component fired; a None entry means that
    component did not jump.
    """
    path_x: TrajectoryPath
    path_z: TrajectoryPath
    strategy: str
    shared_event_log: Optional[List[Tuple[float, Optional[int], Optional[int]]]] = None

    def simultaneous_events(self):
        """Logged events at which both components jumped."""
        if self.shared_event_log is None:
            return []
        return [e for e in self.shared_event_log if e[1] is not None and e[2] is not None]


def _check_compatible(net_x: ReactionNetwork, net_z: ReactionNetwork) -> None:
    if net_x.species_count != net_z.species_count or net_x.channel_count != net_z.channel_count:
        raise CouplingContractError("coupled networks must have the same species and channel counts")
    if not np.array_equal(net_x.change_matrix, net_z.change_matrix):
        raise CouplingContractError("coupled networks must share their reaction vectors")


def shared_environment(net_x: ReactionNetwork, net_z: ReactionNetwork, T: float,
                       s: RandomStream) -> Optional[EnvironmentPath]:
    """One environment path for both components, drawn from ``s.child("environment")``."""
    spec = net_x.environment if net_x.needs_environment else net_z.environment
    if spec is None or not (net_x.needs_environment or net_z.needs_environment):
        return None
    return simulate_environment(spec, T, s.child("environment"))


def couple_independent(net_x: ReactionNetwork, net_z: ReactionNetwork, x0, z0, T: float,
                       s_x: RandomStream, s_z: RandomStream,
                       bound_window: Optional[float] = None) -> CoupledPair:
    """Two independent Extrande runs, each with its own environment.

    Raises:
        CouplingContractError: The two streams have the same identity.
    """
    _check_compatible(net_x, net_z)
    if (s_x.seed, s_x.stream_id) == (s_z.seed, s_z.stream_id):
        raise CouplingContractError(f"independent coupling needs distinct streams, got {s_x!r} twice")
    path_x = simulate_extrande(net_x, x0, T, s_x, bound_window)
    path_z = simulate_extrande(net_z, z0, T, s_z, bound_window)
    return CoupledPair(path_x, path_z, INDEPENDENT)


def couple_crn(net_x: ReactionNetwork, net_z: ReactionNetwork, x0, z0, T: float, s: RandomStream,
               bound_window: Optional[float] = None) -> CoupledPair:
    """Common random numbers: both runs consume the same exponential and uniform sequences.

    Z runs on a replica of X's stream, so the n-th exponential (and the n-th
    uniform) of both runs coincide whatever their clocks do.
    """
    _check_compatible(net_x, net_z)
    environment = shared_environment(net_x, net_z, T, s)
    replica = s.replica()
    path_x = simulate_extrande(net_x, x0, T, s, bound_window, environment)
    path_z = simulate_extrande(net_z, z0, T, replica, bound_window, environment)
    return CoupledPair(path_x, path_z, EXTRANDE_CRN)


def couple_extrande_thinning(net_x: ReactionNetwork, net_z: ReactionNetwork, x0, z0, T: float,
                             s: RandomStream, bound_window: Optional[float] = None,
                             log_events: bool = True, stats: Optional[SimulationStats] = None) -> CoupledPair:
    """One candidate stream bounded by the larger total; one uniform classifies both processes.

    Either process may land in its phantom region on a candidate.
    """
    _check_compatible(net_x, net_z)
    environment = shared_environment(net_x, net_z, T, s)
    px = ExactProcess(bind_network(net_x, T, s, environment), x0, T, bound_window)
    pz = ExactProcess(bind_network(net_z, T, s, environment), z0, T, bound_window)
    log = [] if log_events else None
    run_thinning(px, pz, float(T), s, log, stats)
    return CoupledPair(px.path(), pz.path(), EXTRANDE_THINNING, log)


def couple_stacked(net_x: ReactionNetwork, net_z: ReactionNetwork, x0, z0, T: float, s: RandomStream,
                   bound_window: Optional[float] = None, log_events: bool = True,
                   stats: Optional[SimulationStats] = None) -> CoupledPair:
    """Stacked coupling: one strip per channel of height ``max(bound_x_k, bound_z_k)``.

    Within strip k the pair fires together at rate ``min(rate_x_k, rate_z_k)``,
    always through channel k.

    Raises:
        BoundViolationError: A component's rate exceeded its own certificate.
    """
    _check_compatible(net_x, net_z)
    environment = shared_environment(net_x, net_z, T, s)
    px = ExactProcess(bind_network(net_x, T, s, environment), x0, T, bound_window)
    pz = ExactProcess(bind_network(net_z, T, s, environment), z0, T, bound_window)
    log = [] if log_events else None
    run_stacked(px, pz, 0.0, float(T), s, range(1, net_x.channel_count + 1), log, stats)
    return CoupledPair(px.path(), pz.path(), STACKED, log)


def couple(strategy: str, net_x: ReactionNetwork, net_z: ReactionNetwork, x0, z0, T: float,
           s: RandomStream, bound_window: Optional[float] = None, log_events: bool = False) -> CoupledPair:
    """Dispatch by strategy; the independent coupling uses children ``"x"`` and ``"z"`` of ``s``."""
    strategy = COUPLING_NAMES.get(strategy, strategy)
    if strategy == INDEPENDENT:
        return couple_independent(net_x, net_z, x0, z0, T, s.child("x"), s.child("z"), bound_window)
    if strategy == EXTRANDE_CRN:
        return couple_crn(net_x, net_z, x0, z0, T, s, bound_window)
    if strategy == EXTRANDE_THINNING:
        return couple_extrande_thinning(net_x, net_z, x0, z0, T, s, bound_window, log_events)
    if strategy == STACKED:
        return couple_stacked(net_x, net_z, x0, z0, T, s, bound_window, log_events)
    raise CouplingContractError(
        f"unknown coupling {strategy!r}; expected one of {', '.join(COUPLING_NAMES)}")
