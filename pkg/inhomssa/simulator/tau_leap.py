"""
Tau-leap paths and the couplings the multilevel estimator is built from.

A tau-leap path on the grid ``t_n = n * h`` fires every Euler channel a
Poisson number of times per step, at the rate frozen at the step start, and
applies the summed update at the step end. Channels listed in
``exact_channels`` fire as exact jumps inside the step, driven by the
step-start state plus their own jumps.
"""
import logging
from typing import Optional, Sequence

from .couplings import EXACT_TAU, TAU_PAIR, CoupledPair, shared_environment
from .exact_sim import bind_network
from .exceptions import ModelDefinitionError
from .network import ReactionNetwork
from .processes import ExactProcess, SteppedProcess, run_extrande, run_stacked
from .randomness import RandomStream
from .trajectory import EnvironmentPath, TrajectoryPath

logger = logging.getLogger(__name__)


def level_step(T: float, M: int, level: int) -> float:
    """``h_level = T * M**-level``."""
    if M < 2:
        raise ModelDefinitionError(f"refinement factor must be at least 2, got {M!r}")
    if level < 0:
        raise ModelDefinitionError(f"level must be nonnegative, got {level!r}")
    return T * float(M) ** -level


def simulate_tau_leap(net: ReactionNetwork, x0, T: float, h: float, s: RandomStream,
                      exact_channels: Sequence[int] = (), bound_window: Optional[float] = None,
                      environment: Optional[EnvironmentPath] = None) -> TrajectoryPath:
    """Tau-leap path with step ``h``.

    Leap updates are recorded at step ends with channel index 0; exact-channel
    jumps are recorded with their own index.
    """
    net = bind_network(net, T, s, environment)
    process = SteppedProcess(net, x0, T, h, exact_channels, bound_window)
    for _ in range(process.step_count):
        t0, t1 = process.step_start, process.step_end
        for k in process.euler_channels:
            mean = process.frozen[k - 1] * (t1 - t0)
            if mean > 0:
                process.add_counts(k, s.draw_poisson(mean))
        run_extrande(process, t0, t1, s, process.exact_channels)
    if process.clipped_steps:
        logger.debug("Tau-leap run with h=%r clipped %d steps", h, process.clipped_steps)
    return process.path()


def couple_tau_leap_pair(net: ReactionNetwork, x0, T: float, level: int, M: int, s: RandomStream,
                         exact_channels: Sequence[int] = (), bound_window: Optional[float] = None,
                         log_events: bool = False) -> CoupledPair:
    """Fine (step ``h_level``) and coarse (step ``M * h_level``) tau-leap paths.

    On each fine step every Euler channel draws three Poisson counts with
    means ``h*min(a, b)``, ``h*(a - min)`` and ``h*(b - min)``, where ``a`` is
    the fine frozen rate and ``b`` the coarse rate frozen over the enclosing
    coarse step; the fine path gets the first two, the coarse path the first
    and third. Exact channels are stacked-coupled inside each fine step.

    Returns:
        Pair with ``path_x`` the fine and ``path_z`` the coarse path.
    """
    if level < 1:
        raise ModelDefinitionError(f"a coupled tau-leap pair needs level >= 1, got {level!r}")
    h_fine = level_step(T, M, level)
    environment = shared_environment(net, net, T, s)
    net = bind_network(net, T, s, environment)
    fine = SteppedProcess(net, x0, T, h_fine, exact_channels, bound_window)
    coarse = SteppedProcess(net, x0, T, M * h_fine, exact_channels, bound_window)
    log = [] if log_events else None
    for _ in range(fine.step_count):
        t0, t1 = fine.step_start, fine.step_end
        dt = t1 - t0
        for k in fine.euler_channels:
            a = fine.frozen[k - 1]
            b = coarse.frozen[k - 1]
            common = min(a, b)
            shared = s.draw_poisson(common * dt) if common > 0 else 0
            fine_only = s.draw_poisson((a - common) * dt) if a > common else 0
            coarse_only = s.draw_poisson((b - common) * dt) if b > common else 0
            fine.add_counts(k, shared + fine_only)
            coarse.add_counts(k, shared + coarse_only)
        run_stacked(fine, coarse, t0, t1, s, fine.exact_channels, log)
    return CoupledPair(fine.path(), coarse.path(), TAU_PAIR, log)


def couple_exact_tau(net: ReactionNetwork, x0, T: float, L: int, M: int, s: RandomStream,
                     exact_channels: Sequence[int] = (), bound_window: Optional[float] = None,
                     log_events: bool = False) -> CoupledPair:
    """Stacked coupling of an exact path X with a tau-leap path Z at step ``h_L``.

    Z's Euler channels enter the stack with their step-frozen rates, so each of
    their firings is a thinned event whose update is held until the step end.
    Strips are refreshed after every candidate and at every step boundary.

    Returns:
        Pair with ``path_x`` the exact and ``path_z`` the tau-leap path.
    """
    h = level_step(T, M, L)
    environment = shared_environment(net, net, T, s)
    net = bind_network(net, T, s, environment)
    px = ExactProcess(net, x0, T, bound_window)
    pz = SteppedProcess(net, x0, T, h, exact_channels, bound_window)
    log = [] if log_events else None
    run_stacked(px, pz, 0.0, float(T), s, range(1, net.channel_count + 1), log)
    return CoupledPair(px.path(), pz.path(), EXACT_TAU, log)
