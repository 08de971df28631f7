"""
Propensity specifications and their upper-bound certificates.
"""
import math
from typing import Callable, Iterable, Mapping, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np

from .exceptions import ModelDefinitionError
from .rates import ConstantRate, RateFunction

Reactants = Tuple[Tuple[int, int], ...]


class BoundCertificate(NamedTuple):
    """Upper bound ``bound_value`` on a propensity, valid on ``[t0, escape_time]``."""
    bound_value: float
    escape_time: float


def as_rate(rate: Union[float, RateFunction]) -> RateFunction:
    """Wrap plain numbers as :class:`ConstantRate`."""
    if isinstance(rate, RateFunction):
        return rate
    return ConstantRate(float(rate))


def normalize_reactants(reactants: Union[Mapping[int, int], Iterable[Tuple[int, int]]]) -> Reactants:
    """Turn ``{species_index: multiplicity}`` into a sorted tuple of pairs."""
    items = reactants.items() if isinstance(reactants, Mapping) else reactants
    pairs = []
    for index, multiplicity in items:
        if multiplicity < 0:
            raise ModelDefinitionError(f"negative reactant multiplicity for species {index}")
        if multiplicity:
            pairs.append((int(index), int(multiplicity)))
    return tuple(sorted(pairs))


def reactant_combinations(x: Sequence[int], reactants: Reactants) -> int:
    """Number of distinct reactant combinations, ``prod_i C(x_i, m_i)``."""
    value = 1
    for index, multiplicity in reactants:
        n = int(x[index])
        if n < multiplicity:
            return 0
        value *= n if multiplicity == 1 else math.comb(n, multiplicity)
    return value


def mass_action_propensity(rate: Union[float, RateFunction, Callable[[float], float]],
                           reactants: Union[Mapping[int, int], Iterable[Tuple[int, int]]],
                           x: Sequence[int], t: float = 0.0) -> float:
    """Mass-action propensity ``rate(t) * prod_i C(x_i, m_i)``.

    The stated constant multiplies the number of distinct reactant
    combinations, so ``2P -> D`` with constant c gives ``c x_P (x_P - 1) / 2``.

    Args:
        rate: Nonnegative scalar, or a function of time.
        reactants: Mapping or pairs of (species index, multiplicity).
        x: Current counts.
        t: Current time.
    """
    value = rate(t) if callable(rate) else float(rate)
    if value < 0:
        raise ModelDefinitionError(f"mass-action rate evaluated negative ({value!r}) at t={t!r}")
    try:
        return value * float(reactant_combinations(x, normalize_reactants(reactants)))
    except OverflowError as e:
        raise ModelDefinitionError(f"mass-action propensity overflow for state {list(x)}") from e


class PropensitySpec:
    """A propensity ``lambda_k(t, x)`` together with its bound provider.

    Subclasses implement :meth:`evaluate` and :meth:`bound`. ``bound(t0, t1, x)``
    must return a certificate whose value dominates ``evaluate(s, x)`` for every
    ``s`` in ``[t0, escape_time]``.
    """

    #: rate profile, when the propensity is built from one
    rate: Optional[RateFunction] = None

    def evaluate(self, t: float, x: np.ndarray) -> float:
        raise NotImplementedError

    def bound(self, t0: float, t1: float, x: np.ndarray) -> BoundCertificate:
        raise NotImplementedError

    @property
    def needs_environment(self) -> bool:
        return self.rate is not None and self.rate.needs_environment

    def bind_environment(self, environment_path) -> "PropensitySpec":
        return self


class CallablePropensity(PropensitySpec):
    """User-supplied evaluate/bound callables."""

    def __init__(self, evaluate: Callable[[float, np.ndarray], float],
                 bound: Callable[[float, float, np.ndarray], BoundCertificate]):
        self._evaluate = evaluate
        self._bound = bound

    def evaluate(self, t, x):
        return self._evaluate(t, x)

    def bound(self, t0, t1, x):
        certificate = self._bound(t0, t1, x)
        if not isinstance(certificate, BoundCertificate):
            certificate = BoundCertificate(*certificate)
        return certificate


class MassActionPropensity(PropensitySpec):
    """``rate(t) * prod_i C(x_i, m_i)``.

    Args:
        rate: Rate profile or constant.
        reactants: Mapping or pairs of (species index, multiplicity).
        bound_rate: Optional profile used for certification instead of ``rate``.
    """

    def __init__(self, rate, reactants, bound_rate: Optional[RateFunction] = None):
        self.rate = as_rate(rate)
        self.reactants = normalize_reactants(reactants)
        self.bound_rate = as_rate(bound_rate) if bound_rate is not None else None

    def evaluate(self, t, x):
        combinations = reactant_combinations(x, self.reactants)
        if not combinations:
            return 0.0
        return self.rate(t) * combinations

    def bound(self, t0, t1, x):
        combinations = reactant_combinations(x, self.reactants)
        if not combinations:
            return BoundCertificate(0.0, t1)
        profile = self.bound_rate if self.bound_rate is not None else self.rate
        return BoundCertificate(profile.sup(t0, t1) * combinations, t1)

    def bind_environment(self, environment_path):
        if not self.needs_environment:
            return self
        bound_rate = self.bound_rate.bind_environment(environment_path) if self.bound_rate else None
        return MassActionPropensity(self.rate.bind_environment(environment_path), self.reactants, bound_rate)

    def __repr__(self):
        return f"MassActionPropensity({self.rate!r}, reactants={self.reactants!r})"


class PopulationPropensity(PropensitySpec):
    """``rate(t) * sum_i x_i`` over ``species`` (all species when None)."""

    def __init__(self, rate, species: Optional[Sequence[int]] = None,
                 bound_rate: Optional[RateFunction] = None):
        self.rate = as_rate(rate)
        self.species = tuple(species) if species is not None else None
        self.bound_rate = as_rate(bound_rate) if bound_rate is not None else None

    def _population(self, x):
        if self.species is None:
            return int(np.sum(x))
        return sum(int(x[i]) for i in self.species)

    def evaluate(self, t, x):
        population = self._population(x)
        if not population:
            return 0.0
        return self.rate(t) * population

    def bound(self, t0, t1, x):
        profile = self.bound_rate if self.bound_rate is not None else self.rate
        return BoundCertificate(profile.sup(t0, t1) * self._population(x), t1)

    def bind_environment(self, environment_path):
        if not self.needs_environment:
            return self
        bound_rate = self.bound_rate.bind_environment(environment_path) if self.bound_rate else None
        return PopulationPropensity(self.rate.bind_environment(environment_path), self.species, bound_rate)


class FrequencyPropensity(PropensitySpec):
    """Frequency-dependent contact ``rate(t) * x_a * x_b / N`` with ``N = sum x``.

    Zero when the population is empty.
    """

    def __init__(self, rate, first: int, second: int, species: Optional[Sequence[int]] = None,
                 bound_rate: Optional[RateFunction] = None):
        self.rate = as_rate(rate)
        self.first = int(first)
        self.second = int(second)
        self.species = tuple(species) if species is not None else None
        self.bound_rate = as_rate(bound_rate) if bound_rate is not None else None

    def _contacts(self, x) -> float:
        total = int(np.sum(x)) if self.species is None else sum(int(x[i]) for i in self.species)
        if total == 0:
            return 0.0
        return int(x[self.first]) * int(x[self.second]) / total

    def evaluate(self, t, x):
        contacts = self._contacts(x)
        if not contacts:
            return 0.0
        return self.rate(t) * contacts

    def bound(self, t0, t1, x):
        profile = self.bound_rate if self.bound_rate is not None else self.rate
        return BoundCertificate(profile.sup(t0, t1) * self._contacts(x), t1)

    def bind_environment(self, environment_path):
        if not self.needs_environment:
            return self
        bound_rate = self.bound_rate.bind_environment(environment_path) if self.bound_rate else None
        return FrequencyPropensity(self.rate.bind_environment(environment_path), self.first, self.second,
                                   self.species, bound_rate)
