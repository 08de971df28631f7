"""
Experiment runner: turns a validated :class:`Config` into estimator calls and
CSV artifacts.

Artifacts are written as ``<directory>/<prefix>_*.csv`` plus a run manifest
``<prefix>_run.yaml``; an explicit report path replaces ``<prefix>_report.csv``.
CSV files carry no timestamps, so reruns of the same configuration produce
byte-identical CSVs; timings go to the manifest.
"""
import csv
import logging
import os
import time
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import arrow
import yaml

from .catalog import CatalogModel, get_model
from .config_manager import Config
from .couplings import couple
from .estimators import (DEFAULT_MAX_SAMPLES, EstimatorReport, MlmcConfig, SensitivityJob, estimate_expectation,
                         estimate_mlmc, estimate_sensitivity)
from .exact_sim import simulate_extrande, simulate_hitting_time
from .exceptions import ConfigError, ModelDefinitionError
from .functionals import SpeciesAt, SpeciesOnGrid, StateAt, make_functional, uniform_grid
from .model_loader import load_model
from .network import make_state
from .randomness import sample_stream
from .tau_leap import simulate_tau_leap
from .trajectory import format_number, write_path_csv

logger = logging.getLogger(__name__)

REPORT_COLUMNS = ("quantity", "estimate", "variance", "half_width", "n", "rv_count", "wall_seconds")


@dataclass
class ExperimentSpec:
    """Everything needed to rerun an experiment bit-exactly."""
    command: str
    model: CatalogModel
    seed: int
    T: float
    initial: Tuple[int, ...]
    settings: Dict[str, Any]
    workers: int = 1
    batch_size: int = 50
    bound_window: Optional[float] = None
    output_directory: str = "results"
    prefix: str = ""
    record_timing: bool = False
    report_path: Optional[str] = None
    exact_channels: Tuple[int, ...] = ()
    config: Dict[str, Any] = field(default_factory=dict)

    @classmethod
    def from_config(cls, config: Config) -> "ExperimentSpec":
        """Resolve the model, horizon and initial state of a validated configuration."""
        config.validate()
        command = config.get('experiment.command')
        model_file = config.get('experiment.model_file')
        try:
            model = load_model(model_file) if model_file else get_model(config.get('experiment.model'))
        except ModelDefinitionError as e:
            raise ConfigError('experiment.model_file' if model_file else 'experiment.model', str(e)) from None
        T = config.get_duration('experiment.T', model.time_unit) or model.horizon_default
        initial = config.get('experiment.initial')
        if initial is None:
            initial = model.default_initial
        elif isinstance(initial, dict):
            unknown = set(initial) - set(model.species)
            if unknown:
                raise ConfigError('experiment.initial', f"unknown species {', '.join(sorted(unknown))}")
            initial = tuple(int(initial.get(s, 0)) for s in model.species)
        try:
            initial = tuple(make_state(initial, len(model.species)).tolist())
        except (ModelDefinitionError, TypeError, ValueError) as e:
            raise ConfigError('experiment.initial', str(e)) from None
        window = config.get_duration('experiment.bound_window', model.time_unit)
        directory = config.get('output.directory')
        report_path = config.get('output.report')
        prefix = config.get('output.prefix') or config.get('experiment.name')
        if report_path:
            directory = os.path.dirname(report_path) or "."
            prefix = prefix or os.path.splitext(os.path.basename(report_path))[0]
        prefix = prefix or f"{model.name}_{command}"
        exact_channels = ()
        if command in ('simulate', 'mlmc'):
            exact_channels = config.get_channels(f"{command}.exact_channels")
        return cls(
            command=command,
            model=model,
            seed=config.get('experiment.seed'),
            T=T,
            initial=initial,
            settings=config.to_dict()[command],
            workers=config.get('experiment.workers'),
            batch_size=config.get('experiment.batch_size'),
            bound_window=window,
            output_directory=directory,
            prefix=prefix,
            report_path=report_path,
            record_timing=bool(config.get('output.record_timing', False)),
            exact_channels=exact_channels,
            config=config.to_dict(),
        )

    def artifact(self, suffix: str) -> str:
        return os.path.join(self.output_directory, f"{self.prefix}_{suffix}")


@dataclass
class ExperimentResult:
    reports: List[EstimatorReport]
    files: List[str]
    wall_seconds: float = 0.0


def _species_list(spec: ExperimentSpec, value) -> List[int]:
    net = spec.model.network()
    if value is None:
        return list(range(net.species_count))
    values = value if isinstance(value, (list, tuple)) else [value]
    try:
        return [net.species_index(v) for v in values]
    except ModelDefinitionError as e:
        raise ConfigError(f"{spec.command}.species", str(e)) from None


def _single_species(spec: ExperimentSpec, value) -> int:
    species = _species_list(spec, value)
    return species[0]


def report_rows(reports: Sequence[EstimatorReport], record_timing: bool = False):
    """Rows of the report CSV: per-level rows before each multilevel total."""
    for report in reports:
        wall = [format_number(report.wall_seconds)] if record_timing else []
        for label in report.quantities:
            for level in report.levels:
                yield [f"{label}[{level.name}]", format_number(level.estimate), format_number(level.variance),
                       format_number(level.half_width), str(level.samples), str(level.cost.total)] + wall
        for i, label in enumerate(report.quantities):
            yield [label, format_number(report.estimate[i]), format_number(report.variance[i]),
                   format_number(report.half_width[i]), str(report.samples), str(report.cost.total)] + wall


def write_report_csv(reports: Sequence[EstimatorReport], path: str, record_timing: bool = False) -> None:
    columns = REPORT_COLUMNS if record_timing else REPORT_COLUMNS[:-1]
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(columns)
        writer.writerows(report_rows(reports, record_timing))


def write_variance_csv(report: EstimatorReport, times: Sequence[float], path: str) -> None:
    """Variance curve of a grid functional: one row per grid time."""
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["time", "estimate", "variance", "half_width"])
        for i, t in enumerate(times):
            writer.writerow([format_number(float(t)), format_number(report.estimate[i]),
                             format_number(report.variance[i]), format_number(report.half_width[i])])


def write_pair_csv(pair, species: Sequence[str], times: Sequence[float], path: str) -> None:
    """Both components of a coupled pair on a time grid."""
    grid_x = pair.path_x.on_grid(times)
    grid_z = pair.path_z.on_grid(times)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["time"] + [f"{s}_X" for s in species] + [f"{s}_Z" for s in species])
        for t, x, z in zip(times, grid_x.tolist(), grid_z.tolist()):
            writer.writerow([format_number(float(t))] + [str(v) for v in x] + [str(v) for v in z])


def _run_simulate(spec: ExperimentSpec, files: List[str]) -> List[EstimatorReport]:
    settings = spec.settings
    net = spec.model.network()
    species = _species_list(spec, settings.get('species'))
    at = settings.get('at')
    functional = StateAt(species, spec.T if at is None else float(at), [net.species[i] for i in species])
    method = settings['method']
    exact_channels = spec.exact_channels
    tau_step = settings.get('tau_step')
    report = estimate_expectation(
        net, spec.initial, functional, spec.T, spec.seed,
        n=None if settings.get('target_sd') is not None else settings['n'],
        target_sd=settings.get('target_sd'), method=method, workers=spec.workers,
        batch_size=spec.batch_size, bound_window=spec.bound_window, tol=settings['tol'],
        tau_step=tau_step, exact_channels=exact_channels)
    for index in range(min(settings.get('dump_paths') or 0, report.samples)):
        # same stream as sample `index` of the estimate
        s = sample_stream(spec.seed, f"expectation:{method}", index)
        if method == "extrande":
            path = simulate_extrande(net, spec.initial, spec.T, s, spec.bound_window)
        elif method == "hitting-time":
            path = simulate_hitting_time(net, spec.initial, spec.T, s, settings['tol'])
        else:
            path = simulate_tau_leap(net, spec.initial, spec.T, tau_step, s, exact_channels, spec.bound_window)
        target = spec.artifact(f"path_{index}.csv")
        with open(target, "w", newline="") as f:
            write_path_csv(path, net.species, f)
        files.append(target)
    return [report]


def _perturbation(spec: ExperimentSpec, settings) -> Tuple[str, float, float]:
    parameter = settings['param']
    if parameter not in spec.model.parameters:
        raise ConfigError(f"{spec.command}.param",
                          f"model {spec.model.name} has no parameter {parameter!r}; "
                          f"known: {', '.join(spec.model.parameters)}")
    h = settings.get('h')
    h = float(h) if h is not None else spec.model.perturbation(parameter)
    if not h > 0:
        raise ConfigError(f"{spec.command}.h", f"perturbation must be positive, got {h!r}")
    return parameter, float(spec.model.parameters[parameter]), h


def _run_couple(spec: ExperimentSpec, files: List[str]) -> List[EstimatorReport]:
    settings = spec.settings
    parameter, theta, h = _perturbation(spec, settings)
    index = _single_species(spec, settings.get('species'))
    times = uniform_grid(spec.T, settings['grid_points'])
    net = spec.model.network()
    functional = SpeciesOnGrid(index, times, net.species[index])
    job = SensitivityJob(spec.model.family(parameter), theta, h, functional, settings['coupling'],
                         settings['n'], spec.T, spec.initial, parameter, spec.bound_window)
    report = estimate_sensitivity(job, spec.seed, spec.workers, spec.batch_size)
    target = spec.artifact("variance.csv")
    write_variance_csv(report, times, target)
    files.append(target)
    family = spec.model.family(parameter)
    net_plus, net_minus = family(theta + 0.5 * h), family(theta - 0.5 * h)
    for pair_index in range(min(settings.get('dump_pairs') or 0, report.samples)):
        s = sample_stream(spec.seed, "sensitivity", pair_index)
        pair = couple(settings['coupling'], net_plus, net_minus, spec.initial, spec.initial, spec.T, s,
                      spec.bound_window)
        target = spec.artifact(f"pair_{pair_index}.csv")
        write_pair_csv(pair, net.species, times, target)
        files.append(target)
    return [report]


def _run_sensitivity(spec: ExperimentSpec, files: List[str]) -> List[EstimatorReport]:
    settings = spec.settings
    parameter, theta, h = _perturbation(spec, settings)
    net = spec.model.network()
    index = _single_species(spec, settings.get('species'))
    kind = settings['functional']
    functional = make_functional(net, kind, index, spec.T, settings.get('at'), settings.get('grid_points') or 0)
    job = SensitivityJob(spec.model.family(parameter), theta, h, functional, settings['coupling'],
                         settings['n'], spec.T, spec.initial, parameter, spec.bound_window,
                         settings.get('max_seconds'), settings.get('target_sd'),
                         settings.get('max_samples') or DEFAULT_MAX_SAMPLES)
    report = estimate_sensitivity(job, spec.seed, spec.workers, spec.batch_size)
    if kind == "grid":
        target = spec.artifact("variance.csv")
        write_variance_csv(report, functional.times, target)
        files.append(target)
    return [report]


def _run_mlmc(spec: ExperimentSpec, files: List[str]) -> List[EstimatorReport]:
    settings = spec.settings
    net = spec.model.network()
    ell0, L = settings['levels']
    exact_channels = spec.exact_channels
    if any(k > net.channel_count for k in exact_channels):
        raise ConfigError('mlmc.exact_channels', f"network has only {net.channel_count} channels")
    cfg = MlmcConfig(settings['M'], ell0, L, spec.T, float(settings['target_sd']), exact_channels,
                     bool(settings['exact_level']), settings['pilot'], settings['max_samples'],
                     spec.bound_window, settings.get('max_seconds'))
    reports = []
    for index in _species_list(spec, settings.get('species')):
        functional = SpeciesAt(index, spec.T, net.species[index])
        reports.append(estimate_mlmc(net, spec.initial, functional, cfg, spec.seed, spec.workers,
                                     spec.batch_size))
        if settings.get('compare_direct'):
            reports.append(estimate_expectation(net, spec.initial, functional, spec.T, spec.seed,
                                                target_sd=cfg.target_sd, workers=spec.workers,
                                                batch_size=spec.batch_size, bound_window=spec.bound_window,
                                                max_samples=cfg.max_samples, max_seconds=cfg.max_seconds))
    return reports


_RUNNERS = {
    'simulate': _run_simulate,
    'couple': _run_couple,
    'sensitivity': _run_sensitivity,
    'mlmc': _run_mlmc,
}


def _manifest(spec: ExperimentSpec, result: ExperimentResult, started: arrow.Arrow) -> Dict[str, Any]:
    return {
        'command': spec.command,
        'model': spec.model.name,
        'seed': spec.seed,
        'horizon': spec.T,
        'initial': list(spec.initial),
        'started': started.isoformat(),
        'finished': arrow.utcnow().isoformat(),
        'wall_seconds': round(result.wall_seconds, 6),
        'files': [os.path.basename(f) for f in result.files],
        'reports': [
            {
                'kind': r.kind,
                'quantities': list(r.quantities),
                'samples': r.samples,
                'random_variables': r.cost.total,
                'converged': r.converged,
                'truncated': r.truncated,
            }
            for r in result.reports
        ],
        'config': spec.config,
    }


def run_experiment(spec: ExperimentSpec) -> ExperimentResult:
    """Run one experiment and write its artifacts.

    Returns:
        The reports and the list of written files (manifest last).
    """
    os.makedirs(spec.output_directory, exist_ok=True)
    started = arrow.utcnow()
    clock = time.perf_counter()
    files: List[str] = []
    logger.info("Running %s on model %s (T=%r, seed=%d)", spec.command, spec.model.name, spec.T, spec.seed)
    reports = _RUNNERS[spec.command](spec, files)
    report_path = spec.report_path or spec.artifact("report.csv")
    write_report_csv(reports, report_path, spec.record_timing)
    files.insert(0, report_path)
    result = ExperimentResult(reports, files, time.perf_counter() - clock)
    manifest_path = spec.artifact("run.yaml")
    with open(manifest_path, "w") as f:
        yaml.safe_dump(_manifest(spec, result, started), f, default_flow_style=False, sort_keys=False)
    result.files.append(manifest_path)
    for report in reports:
        for label, estimate, half_width in zip(report.quantities, report.estimate, report.half_width):
            logger.info("%s = %s +/- %s (n=%d)", label, format_number(estimate), format_number(half_width),
                        report.samples)
    return result
