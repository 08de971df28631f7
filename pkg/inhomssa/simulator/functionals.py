"""
Path functionals ``f(path)`` fed to the estimators.

Every functional returns a 1-D float array, one entry per label.
"""
from typing import Sequence, Tuple

import numpy as np

from .network import ReactionNetwork
from .trajectory import TrajectoryPath


class PathFunctional:
    """Base class; ``labels`` name the entries of the returned vector."""

    labels: Tuple[str, ...] = ()

    def __call__(self, path: TrajectoryPath) -> np.ndarray:
        raise NotImplementedError

    @property
    def size(self) -> int:
        return len(self.labels)


class SpeciesAt(PathFunctional):
    """Count of one species at time ``t``."""

    def __init__(self, species: int, t: float, name: str = ""):
        self.species = int(species)
        self.t = float(t)
        self.labels = (f"{name or f'x{self.species}'}({self.t!r})",)

    def __call__(self, path):
        return np.array([float(path.value_at(self.t)[self.species])])


class StateAt(PathFunctional):
    """Counts of several species at time ``t``."""

    def __init__(self, species: Sequence[int], t: float, names: Sequence[str] = ()):
        self.species = [int(i) for i in species]
        self.t = float(t)
        names = list(names) or [f"x{i}" for i in self.species]
        self.labels = tuple(f"{name}({self.t!r})" for name in names)

    def __call__(self, path):
        return path.value_at(self.t)[self.species].astype(float)


class SpeciesOnGrid(PathFunctional):
    """Count of one species at each grid time (variance curves)."""

    def __init__(self, species: int, times: Sequence[float], name: str = ""):
        self.species = int(species)
        self.times = np.asarray(times, dtype=float)
        label = name or f"x{self.species}"
        self.labels = tuple(f"{label}({t!r})" for t in self.times.tolist())

    def __call__(self, path):
        return path.on_grid(self.times)[:, self.species].astype(float)


class ExtinctionBefore(PathFunctional):
    """Indicator that a species first hits zero strictly before ``horizon``."""

    def __init__(self, species: int, horizon: float, name: str = ""):
        self.species = int(species)
        self.horizon = float(horizon)
        self.labels = (f"P({name or f'x{self.species}'}=0 before {self.horizon!r})",)

    def __call__(self, path):
        hit = path.first_time_at(self.species, 0)
        return np.array([1.0 if hit is not None and hit < self.horizon else 0.0])


def uniform_grid(T: float, points: int) -> np.ndarray:
    """``points`` equally spaced times on ``[0, T]``, both ends included."""
    if points < 2:
        return np.array([float(T)])
    return np.linspace(0.0, T, points)


def make_functional(net: ReactionNetwork, kind: str, species, T: float, at: float = None,
                    grid_points: int = 0) -> PathFunctional:
    """Build a functional from configuration values.

    Args:
        net: Network used to resolve species names.
        kind: ``"endpoint"``, ``"grid"`` or ``"extinction"``.
        species: Species name or 0-based index.
        T: Horizon; default evaluation time and extinction horizon.
        at: Evaluation time of an endpoint functional (defaults to ``T``).
        grid_points: Number of grid times of a grid functional.
    """
    index = net.species_index(species)
    name = net.species[index]
    if kind == "endpoint":
        return SpeciesAt(index, T if at is None else at, name)
    if kind == "grid":
        return SpeciesOnGrid(index, uniform_grid(T, grid_points or 101), name)
    if kind == "extinction":
        return ExtinctionBefore(index, T if at is None else at, name)
    raise ValueError(f"unknown functional kind {kind!r}; expected endpoint, grid or extinction")
