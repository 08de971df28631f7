"""
Reaction networks from YAML model files.

A model file looks like::

    name: birth-death
    time_unit: h
    species: [M, P]
    initial: {M: 0, P: 0}
    horizon: 20h
    parameters: {amplitude: 15}
    channels:
      - label: transcription
        products: {M: 1}
        rate: {sinusoid: {base: 60, amplitude: amplitude, period: 24}}
      - reactants: {M: 1}
        products: {M: 1, P: 1}
        rate: {constant: 100}

Rates are one of ``{constant: c}``,
``{sinusoid: {base, amplitude, period, phase}}``,
``{pulse: {k | m, s, phi}}`` and ``{modulated: {scale}}``; any number may
name an entry of ``parameters``. ``bound`` takes the same grammar and, when
given, is used for certification instead of the rate. ``kinetics`` is
``mass_action`` (default), ``population`` (rate times the summed counts of
``species``, default all) or ``frequency`` (rate times ``x_a x_b / N`` for
the two reactants, zero when ``N = 0``). Modulated rates need an
``environment`` section with ``levels``, ``transition``, ``initial``
(a level value) and optionally ``holding_rate``.
"""
import logging
from typing import Any, Dict, Mapping

import yaml

from .catalog import CatalogModel
from .config_manager import parse_duration
from .exceptions import ModelDefinitionError
from .network import EnvironmentModel, ReactionChannel, ReactionNetwork
from .propensity import FrequencyPropensity, MassActionPropensity, PopulationPropensity
from .rates import ConstantRate, ModulatedRate, RateFunction, SinusoidalRate
from .seasonality import BirthPulseRate

logger = logging.getLogger(__name__)

KINETICS = ("mass_action", "population", "frequency")


def _number(value, parameters: Mapping[str, float], where: str) -> float:
    if isinstance(value, str):
        if value not in parameters:
            raise ModelDefinitionError(f"{where}: unknown parameter {value!r}")
        return float(parameters[value])
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ModelDefinitionError(f"{where}: expected a number or parameter name, got {value!r}")
    return float(value)


def parse_rate(spec: Any, parameters: Mapping[str, float], environment: EnvironmentModel = None,
               where: str = "rate") -> RateFunction:
    """Build a rate profile from the rate grammar."""
    if not isinstance(spec, dict):
        return ConstantRate(_number(spec, parameters, where))
    if len(spec) != 1:
        raise ModelDefinitionError(f"{where}: expected exactly one rate form, got {sorted(spec)}")
    (form, body), = spec.items()
    if form == "constant":
        return ConstantRate(_number(body, parameters, f"{where}.constant"))
    if not isinstance(body, dict):
        raise ModelDefinitionError(f"{where}.{form}: expected a mapping")

    def field(name, default=None):
        if name not in body:
            if default is None:
                raise ModelDefinitionError(f"{where}.{form}: missing {name!r}")
            return default
        return _number(body[name], parameters, f"{where}.{form}.{name}")

    if form == "sinusoid":
        return SinusoidalRate(field("base"), field("amplitude"), field("period", 24.0), field("phase", 0.0))
    if form == "pulse":
        if ("m" in body) == ("k" in body):
            raise ModelDefinitionError(f"{where}.pulse: give exactly one of 'm' or 'k'")
        scale = {"m": field("m")} if "m" in body else {"k": field("k")}
        return BirthPulseRate(field("s"), field("phi", 0.0), **scale)
    if form == "modulated":
        if environment is None:
            raise ModelDefinitionError(f"{where}.modulated: model has no environment section")
        return ModulatedRate(field("scale"), environment.levels)
    raise ModelDefinitionError(f"{where}: unknown rate form {form!r}")


def _parse_environment(spec: Mapping[str, Any]) -> EnvironmentModel:
    try:
        levels = tuple(float(v) for v in spec["levels"])
        transition = tuple(tuple(float(p) for p in row) for row in spec["transition"])
    except (KeyError, TypeError, ValueError) as e:
        raise ModelDefinitionError(f"environment: needs numeric 'levels' and 'transition' ({e})") from None
    initial = spec.get("initial", levels[0])
    if float(initial) not in levels:
        raise ModelDefinitionError(f"environment.initial: {initial!r} is not one of the levels {levels}")
    return EnvironmentModel(levels, transition, levels.index(float(initial)),
                            float(spec.get("holding_rate", 1.0)))


def _stoichiometry(spec, species, where) -> Dict[int, int]:
    if spec is None:
        return {}
    if not isinstance(spec, dict):
        raise ModelDefinitionError(f"{where}: expected a mapping of species to counts")
    result = {}
    for name, count in spec.items():
        if name not in species:
            raise ModelDefinitionError(f"{where}: unknown species {name!r}")
        if isinstance(count, bool) or not isinstance(count, int) or count < 0:
            raise ModelDefinitionError(f"{where}.{name}: expected a nonnegative integer, got {count!r}")
        result[species.index(name)] = count
    return result


def _build(document: Mapping[str, Any], parameters: Mapping[str, float]) -> ReactionNetwork:
    species = tuple(document["species"])
    environment = _parse_environment(document["environment"]) if document.get("environment") else None
    channels = []
    for k, spec in enumerate(document.get("channels") or [], start=1):
        where = f"channels[{k}]"
        if not isinstance(spec, dict) or "rate" not in spec:
            raise ModelDefinitionError(f"{where}: each channel needs a 'rate'")
        reactants = _stoichiometry(spec.get("reactants"), species, f"{where}.reactants")
        products = _stoichiometry(spec.get("products"), species, f"{where}.products")
        change = tuple(products.get(i, 0) - reactants.get(i, 0) for i in range(len(species)))
        rate = parse_rate(spec["rate"], parameters, environment, f"{where}.rate")
        bound = parse_rate(spec["bound"], parameters, environment, f"{where}.bound") if "bound" in spec else None
        kinetics = spec.get("kinetics", "mass_action")
        if kinetics == "mass_action":
            propensity = MassActionPropensity(rate, reactants, bound)
        elif kinetics == "population":
            subset = spec.get("species")
            indices = [species.index(s) for s in subset] if subset else None
            propensity = PopulationPropensity(rate, indices, bound)
        elif kinetics == "frequency":
            pair = [i for i, m in sorted(reactants.items()) for _ in range(m)]
            if len(pair) != 2 or pair[0] == pair[1]:
                raise ModelDefinitionError(f"{where}: frequency kinetics needs two distinct single reactants")
            subset = spec.get("species")
            indices = [species.index(s) for s in subset] if subset else None
            propensity = FrequencyPropensity(rate, pair[0], pair[1], indices, bound)
        else:
            raise ModelDefinitionError(f"{where}.kinetics: expected one of {', '.join(KINETICS)}, got {kinetics!r}")
        channels.append(ReactionChannel(change, propensity, str(spec.get("label", ""))))
    return ReactionNetwork(species, tuple(channels), environment, str(document.get("name", "")))


def parse_model(document: Mapping[str, Any]) -> CatalogModel:
    """Turn a parsed model document into a parameterized model."""
    if not isinstance(document, dict):
        raise ModelDefinitionError("model file must be a mapping")
    for key in ("species", "channels"):
        if not document.get(key):
            raise ModelDefinitionError(f"model file needs a nonempty {key!r} section")
    species = tuple(str(s) for s in document["species"])
    if len(set(species)) != len(species):
        raise ModelDefinitionError("species names must be unique")
    parameters = {str(k): _number(v, {}, f"parameters.{k}") for k, v in (document.get("parameters") or {}).items()}
    unit = str(document.get("time_unit", "h"))
    initial_spec = document.get("initial") or {}
    if isinstance(initial_spec, dict):
        unknown = set(initial_spec) - set(species)
        if unknown:
            raise ModelDefinitionError(f"initial: unknown species {', '.join(sorted(map(str, unknown)))}")
        initial = tuple(int(initial_spec.get(s, 0)) for s in species)
    else:
        initial = tuple(int(v) for v in initial_spec)
    try:
        horizon = parse_duration(document.get("horizon", 1.0), unit)
    except ValueError as e:
        raise ModelDefinitionError(f"horizon: {e}") from None
    document = dict(document, species=species)
    # Build once so that errors surface at load time
    _build(document, parameters)
    return CatalogModel(
        name=str(document.get("name", "model")),
        description=str(document.get("description", "")),
        species=species,
        builder=lambda values: _build(document, values),
        parameters=parameters,
        default_initial=initial,
        horizon_default=horizon,
        time_unit=unit,
    )


def load_model(path: str) -> CatalogModel:
    """Load a model file.

    Raises:
        ModelDefinitionError: The file cannot be read or violates the grammar.
    """
    try:
        with open(path, "r") as f:
            document = yaml.safe_load(f)
    except (OSError, yaml.YAMLError) as e:
        raise ModelDefinitionError(f"cannot read model file {path}: {e}") from None
    model = parse_model(document)
    logger.debug("Loaded model %s from %s: %d species, %d channels",
                 model.name, path, len(model.species), model.network().channel_count)
    return model
