"""
Built-in models: model1, dimer, sir and mmp.

Every model is a parameter family: ``model.network(amplitude=15.1)`` builds
the network with one parameter changed, and ``model.family("amplitude")``
returns the map ``theta -> network`` used by sensitivity jobs.
"""
from dataclasses import dataclass, field
from typing import Callable, Dict, Mapping, Tuple

from .exceptions import ModelDefinitionError
from .network import EnvironmentModel, ReactionChannel, ReactionNetwork
from .propensity import FrequencyPropensity, MassActionPropensity, PopulationPropensity
from .rates import ModulatedRate, SinusoidalRate
from .seasonality import BirthPulseRate, bessel_i0, birth_pulse_rate

__all__ = [
    "CatalogModel", "MODELS", "get_model", "model_names", "bessel_i0", "birth_pulse_rate",
]


@dataclass(frozen=True)
class CatalogModel:
    """A named parameterized network with its default initial state and horizon."""
    name: str
    description: str
    species: Tuple[str, ...]
    builder: Callable[[Mapping[str, float]], ReactionNetwork] = field(repr=False)
    parameters: Mapping[str, float]
    default_initial: Tuple[int, ...]
    horizon_default: float
    time_unit: str = "h"
    #: perturbation used when a sensitivity run does not give one
    default_perturbation: Mapping[str, float] = field(default_factory=dict)

    def network(self, **overrides: float) -> ReactionNetwork:
        """Network with nominal parameters, some possibly overridden."""
        unknown = set(overrides) - set(self.parameters)
        if unknown:
            raise ModelDefinitionError(
                f"model {self.name} has no parameter(s) {', '.join(sorted(unknown))}; "
                f"known: {', '.join(self.parameters)}")
        values = dict(self.parameters)
        values.update(overrides)
        return self.builder(values)

    def family(self, parameter: str) -> Callable[[float], ReactionNetwork]:
        """``theta -> network`` with ``parameter`` set to ``theta``."""
        if parameter not in self.parameters:
            raise ModelDefinitionError(f"model {self.name} has no parameter {parameter!r}")
        return lambda theta: self.network(**{parameter: theta})

    def perturbation(self, parameter: str) -> float:
        """Default ``h``: the catalog value, else 5% of the nominal parameter."""
        if parameter in self.default_perturbation:
            return self.default_perturbation[parameter]
        return 0.05 * abs(self.parameters[parameter])


def _transcription_channels(p: Mapping[str, float], d: int):
    """Transcription, translation and the two decays on species M=0, P=1 of a d-species network."""

    def change(*entries):
        vector = [0] * d
        for index, delta in entries:
            vector[index] = delta
        return tuple(vector)

    transcription = SinusoidalRate(p["birth"], p["amplitude"], p["period"])
    return [
        ReactionChannel(change((0, 1)), MassActionPropensity(transcription, {}), "transcription"),
        ReactionChannel(change((1, 1)), MassActionPropensity(p["translation"], {0: 1}), "translation"),
        ReactionChannel(change((0, -1)), MassActionPropensity(p["mrna_decay"], {0: 1}), "mRNA decay"),
        ReactionChannel(change((1, -1)), MassActionPropensity(p["protein_decay"], {1: 1}), "protein decay"),
    ]


def _build_model1(p):
    return ReactionNetwork(("M", "P"), tuple(_transcription_channels(p, 2)), name="model1")


def _build_dimer(p):
    channels = _transcription_channels(p, 3)
    channels += [
        ReactionChannel((0, -2, 1), MassActionPropensity(p["dimerization"], {1: 2}), "dimerization"),
        ReactionChannel((0, 0, -1), MassActionPropensity(p["dimer_decay"], {2: 1}), "dimer decay"),
    ]
    return ReactionNetwork(("M", "P", "D"), tuple(channels), name="dimer")


def sir_transmission(p: Mapping[str, float]) -> float:
    """``beta = R0 * (m + gamma)``."""
    return p["R0"] * (p["m"] + p["gamma"])


def _build_sir(p):
    m = p["m"]
    births = BirthPulseRate(p["s"], p["phi"], m=m)
    channels = (
        ReactionChannel((1, 0, 0), PopulationPropensity(births), "birth"),
        ReactionChannel((-1, 0, 0), MassActionPropensity(m, {0: 1}), "death S"),
        ReactionChannel((0, -1, 0), MassActionPropensity(m, {1: 1}), "death I"),
        ReactionChannel((0, 0, -1), MassActionPropensity(m, {2: 1}), "death R"),
        ReactionChannel((-1, 1, 0), FrequencyPropensity(sir_transmission(p), 0, 1), "infection"),
        ReactionChannel((0, -1, 1), MassActionPropensity(p["gamma"], {1: 1}), "recovery"),
    )
    return ReactionNetwork(("S", "I", "R"), channels, name="sir")


MMP_LEVELS = (0.5, 1.5, 5.0)
MMP_TRANSITION = ((0.0, 0.5, 0.5), (0.5, 0.0, 0.5), (0.5, 0.5, 0.0))


def _build_mmp(p):
    environment = EnvironmentModel(MMP_LEVELS, MMP_TRANSITION, initial_index=0, holding_rate=1.0)
    channels = (
        ReactionChannel((-1, -1, 1, 0), MassActionPropensity(ModulatedRate(p["scale"], MMP_LEVELS), {0: 1, 1: 1}),
                        "binding"),
        ReactionChannel((1, 1, -1, 0), MassActionPropensity(p["unbinding"], {2: 1}), "unbinding"),
        ReactionChannel((0, 1, -1, 1), MassActionPropensity(p["conversion"], {2: 1}), "conversion"),
    )
    return ReactionNetwork(("S1", "S2", "S3", "S4"), channels, environment, name="mmp")


_MODEL1_PARAMETERS = {
    "birth": 60.0, "amplitude": 15.0, "period": 24.0,
    "translation": 100.0, "mrna_decay": 1.0, "protein_decay": 1.0,
}

MODELS: Dict[str, CatalogModel] = {
    "model1": CatalogModel(
        name="model1",
        description="transcription and translation with a daily transcription cycle",
        species=("M", "P"),
        builder=_build_model1,
        parameters=dict(_MODEL1_PARAMETERS),
        default_initial=(0, 0),
        horizon_default=20.0,
        default_perturbation={"amplitude": 0.1, "mrna_decay": 0.05},
    ),
    "dimer": CatalogModel(
        name="dimer",
        description="transcription, translation and protein dimerization",
        species=("M", "P", "D"),
        builder=_build_dimer,
        parameters=dict(_MODEL1_PARAMETERS, dimerization=3e-7, dimer_decay=10.0),
        default_initial=(0, 1000, 0),
        horizon_default=20.0,
        default_perturbation={"amplitude": 0.1, "mrna_decay": 0.05},
    ),
    "sir": CatalogModel(
        name="sir",
        description="SIR epidemic with seasonal birth pulses (parameters are documented guesses)",
        species=("S", "I", "R"),
        builder=_build_sir,
        parameters={"m": 0.1, "gamma": 26.0, "R0": 2.0, "s": 10.0, "phi": 0.0},
        default_initial=(400, 50, 50),
        horizon_default=10.0,
        time_unit="y",
        default_perturbation={"phi": 0.05},
    ),
    "mmp": CatalogModel(
        name="mmp",
        description="binding with a Markov-modulated binding rate",
        species=("S1", "S2", "S3", "S4"),
        builder=_build_mmp,
        parameters={"scale": 0.001, "unbinding": 1.0, "conversion": 1.0},
        default_initial=(1000, 1000, 0, 0),
        horizon_default=2.0,
    ),
}


def model_names() -> Tuple[str, ...]:
    return tuple(MODELS)


def get_model(name: str) -> CatalogModel:
    """Catalog entry by name.

    Raises:
        ModelDefinitionError: No such model.
    """
    try:
        return MODELS[name]
    except KeyError:
        raise ModelDefinitionError(f"unknown model {name!r}; built-ins: {', '.join(MODELS)}") from None
