import math

import numpy as np
import pytest
from scipy import integrate

from conftest import birth_death_network, birth_network
from inhomssa.simulator.catalog import get_model
from inhomssa.simulator.estimators import (MlmcConfig, MomentAccumulator, SensitivityJob, estimate_expectation,
                                           estimate_mlmc, estimate_sensitivity, run_batches)
from inhomssa.simulator.exact_sim import simulate_extrande
from inhomssa.simulator.exceptions import ConfigError
from inhomssa.simulator.functionals import (ExtinctionBefore, SpeciesAt, SpeciesOnGrid, StateAt, make_functional,
                                            uniform_grid)
from inhomssa.simulator.network import ReactionChannel, ReactionNetwork
from inhomssa.simulator.propensity import MassActionPropensity
from inhomssa.simulator.randomness import DrawCounter, RandomStream
from inhomssa.simulator.rates import SinusoidalRate
from inhomssa.simulator.trajectory import PathRecorder


def decay_network():
    return ReactionNetwork(("A",), (ReactionChannel((-1,), MassActionPropensity(1.0, {0: 1}), "decay"),))


def test_moment_accumulator_matches_numpy(rng):
    values = rng.normal(3.0, 2.0, size=(257, 3))
    whole = MomentAccumulator(3)
    for row in values:
        whole.add(row)
    parts = [MomentAccumulator(3) for _ in range(4)]
    for i, row in enumerate(values):
        parts[i % 4].add(row)
    merged = MomentAccumulator(3)
    for part in parts:
        merged.merge(part)
    for accumulator in (whole, merged):
        assert accumulator.count == 257
        assert accumulator.mean == pytest.approx(values.mean(axis=0))
        assert accumulator.variance == pytest.approx(values.var(axis=0, ddof=1))


def test_moment_accumulator_small_counts():
    accumulator = MomentAccumulator(1)
    assert accumulator.variance.tolist() == [0.0]
    accumulator.add(np.array([4.0]))
    assert accumulator.variance.tolist() == [0.0]
    assert MomentAccumulator(1).merge(accumulator).mean.tolist() == [4.0]


def _square(index):
    counter = DrawCounter(exponentials_drawn=index)
    return np.array([float(index) ** 2]), counter


def test_run_batches_independent_of_workers():
    single = run_batches(_square, 1, 0, 103, workers=1, batch_size=10)
    threaded = run_batches(_square, 1, 0, 103, workers=4, batch_size=10)
    assert single.moments.count == threaded.moments.count == 103
    assert single.moments.mean.tolist() == threaded.moments.mean.tolist()
    assert single.moments.m2.tolist() == threaded.moments.m2.tolist()
    assert single.cost.total == sum(range(103))


def test_run_batches_deadline_truncates():
    outcome = run_batches(_square, 1, 0, 100, batch_size=10, deadline=0.0)
    assert outcome.truncated
    assert outcome.moments.count == 0


def test_functionals():
    path_net = birth_network(2.0)
    path = simulate_extrande(path_net, (3,), 5.0, RandomStream(1))
    assert SpeciesAt(0, 5.0)(path).tolist() == [float(path.final_state[0])]
    assert StateAt([0], 0.0, ["A"]).labels == ("A(0.0)",)
    grid = uniform_grid(5.0, 6)
    assert grid.tolist() == [0.0, 1.0, 2.0, 3.0, 4.0, 5.0]
    on_grid = SpeciesOnGrid(0, grid, "A")
    assert on_grid.size == 6
    assert on_grid(path)[0] == 3.0
    assert ExtinctionBefore(0, 5.0)(path).tolist() == [0.0]
    assert make_functional(path_net, "endpoint", "A", 5.0).labels == ("A(5.0)",)
    assert make_functional(path_net, "grid", 0, 5.0).size == 101
    with pytest.raises(ValueError):
        make_functional(path_net, "median", 0, 5.0)


def test_extinction_is_strict():
    recorder = PathRecorder(np.array([1]))
    recorder.record(2.0, 1, np.array([0]))
    path = recorder.build(5.0)
    assert ExtinctionBefore(0, 2.0)(path).tolist() == [0.0]
    assert ExtinctionBefore(0, 2.5)(path).tolist() == [1.0]


def test_expectation_needs_one_stopping_rule(birth):
    functional = SpeciesAt(0, 1.0)
    with pytest.raises(ConfigError):
        estimate_expectation(birth, (0,), functional, 1.0, 1)
    with pytest.raises(ConfigError):
        estimate_expectation(birth, (0,), functional, 1.0, 1, n=10, target_sd=0.1)
    with pytest.raises(ConfigError, match="tau_step"):
        estimate_expectation(birth, (0,), functional, 1.0, 1, n=10, method="tau-leap")


def test_expectation_constant_birth(birth):
    report = estimate_expectation(birth, (0,), SpeciesAt(0, 5.0), 5.0, 2024, n=1000)
    assert report.samples == 1000
    assert abs(report.estimate[0] - 10.0) < 3.0 * math.sqrt(10.0 / 1000)
    assert report.variance[0] == pytest.approx(10.0, rel=0.15)
    assert report.estimator_variance[0] == pytest.approx(report.variance[0] / 1000)
    assert report.half_width[0] == pytest.approx(1.96 * math.sqrt(report.variance[0] / 1000))
    assert report.cost.exponentials_drawn > 0
    assert report.converged


def test_expectation_reproducible_across_workers():
    net = birth_death_network()
    functional = StateAt([0], 3.0)
    a = estimate_expectation(net, (0,), functional, 3.0, 99, n=120, workers=1, batch_size=25)
    b = estimate_expectation(net, (0,), functional, 3.0, 99, n=120, workers=3, batch_size=25)
    assert a.estimate.tolist() == b.estimate.tolist()
    assert a.variance.tolist() == b.variance.tolist()
    assert a.cost == b.cost


def test_expectation_methods_agree():
    net = birth_death_network()
    functional = SpeciesAt(0, 2.0)
    extrande = estimate_expectation(net, (0,), functional, 2.0, 5, n=300)
    hitting = estimate_expectation(net, (0,), functional, 2.0, 5, n=300, method="hitting-time", tol=1e-8)
    spread = math.sqrt(extrande.estimator_variance[0] + hitting.estimator_variance[0])
    assert abs(extrande.estimate[0] - hitting.estimate[0]) < 4.0 * spread


def test_expectation_to_target_sd(birth):
    report = estimate_expectation(birth, (0,), SpeciesAt(0, 5.0), 5.0, 7, target_sd=0.2)
    assert report.converged
    assert report.standard_deviation[0] <= 0.2
    assert report.samples >= 10.0 / 0.2 ** 2 * 0.7


def test_expectation_budget_flags_unconverged(birth):
    report = estimate_expectation(birth, (0,), SpeciesAt(0, 5.0), 5.0, 7, target_sd=0.01, max_samples=150)
    assert not report.converged
    assert report.samples == 150


def test_sensitivity_job_validation():
    family = birth_network
    with pytest.raises(ConfigError, match="sensitivity.h"):
        SensitivityJob(family, 2.0, 0.0, SpeciesAt(0, 1.0), "stacked", 10, 1.0, (0,))
    with pytest.raises(ConfigError, match="sensitivity.coupling"):
        SensitivityJob(family, 2.0, 0.1, SpeciesAt(0, 1.0), "split", 10, 1.0, (0,))
    with pytest.raises(ConfigError, match="sensitivity.n"):
        SensitivityJob(family, 2.0, 0.1, SpeciesAt(0, 1.0), "crn", 0, 1.0, (0,))
    with pytest.raises(ConfigError, match="sensitivity.target_sd"):
        SensitivityJob(family, 2.0, 0.1, SpeciesAt(0, 1.0), "crn", 10, 1.0, (0,), target_sd=0.0)


def _amplitude_family(theta):
    return ReactionNetwork(("A",), (
        ReactionChannel((1,), MassActionPropensity(SinusoidalRate(5.0, theta, 4.0), {}), "birth"),
        ReactionChannel((-1,), MassActionPropensity(1.0, {0: 1}), "decay"),
    ))


def test_sensitivity_matches_derivative():
    T = 3.0
    # d/dtheta E A(T) = int_0^T exp(-(T-s)) sin(2 pi s / 4) ds
    exact, _ = integrate.quad(lambda s: math.exp(-(T - s)) * math.sin(2 * math.pi * s / 4.0), 0.0, T)
    job = SensitivityJob(_amplitude_family, 2.0, 0.5, SpeciesAt(0, T), "stacked", 400, T, (0,), "amplitude")
    report = estimate_sensitivity(job, 11)
    assert report.quantities == ("dx0(3.0)/damplitude",)
    assert abs(report.estimate[0] - exact) < 4.0 * report.standard_deviation[0] + 0.05


def test_sensitivity_variance_ordering():
    reports = {}
    for coupling in ("independent", "stacked"):
        job = SensitivityJob(_amplitude_family, 2.0, 0.2, SpeciesAt(0, 3.0), coupling, 200, 3.0, (0,))
        reports[coupling] = estimate_sensitivity(job, 12)
    assert reports["stacked"].variance[0] < reports["independent"].variance[0] / 4


def test_sensitivity_time_budget():
    job = SensitivityJob(_amplitude_family, 2.0, 0.2, SpeciesAt(0, 3.0), "crn", 500, 3.0, (0,),
                         max_seconds=1e-9)
    report = estimate_sensitivity(job, 13, batch_size=10)
    assert report.truncated
    assert not report.converged
    assert report.samples < 500


def test_sensitivity_to_target_sd():
    job = SensitivityJob(_amplitude_family, 2.0, 0.5, SpeciesAt(0, 3.0), "independent", 1, 3.0, (0,),
                         target_sd=0.4)
    report = estimate_sensitivity(job, 14)
    assert report.converged
    assert report.standard_deviation[0] <= 0.4
    # the pilot alone is too small for independent pairs
    assert report.samples > 100


def test_sensitivity_target_sd_budget():
    job = SensitivityJob(_amplitude_family, 2.0, 0.5, SpeciesAt(0, 3.0), "independent", 1, 3.0, (0,),
                         target_sd=0.01, max_samples=120)
    report = estimate_sensitivity(job, 14)
    assert not report.converged
    assert not report.truncated
    assert report.samples == 120


def test_mlmc_config_validation():
    with pytest.raises(ConfigError, match="mlmc.M"):
        MlmcConfig(1, 0, 1, 1.0, 0.1)
    with pytest.raises(ConfigError, match="mlmc.levels"):
        MlmcConfig(4, 3, 2, 1.0, 0.1)
    with pytest.raises(ConfigError, match="mlmc.target_sd"):
        MlmcConfig(4, 1, 2, 1.0, 0.0)
    assert MlmcConfig(4, 2, 3, 2.0, 0.1).step(3) == pytest.approx(2.0 / 64)


def test_mlmc_needs_scalar_functional(birth):
    with pytest.raises(ValueError):
        estimate_mlmc(birth, (0,), StateAt([0, 0], 1.0), MlmcConfig(2, 0, 1, 1.0, 0.1), 1)


def test_mlmc_constant_rate():
    net = birth_network(5.0)
    cfg = MlmcConfig(M=4, ell0=1, L=2, T=2.0, target_sd=0.5)
    report = estimate_mlmc(net, (0,), SpeciesAt(0, 2.0), cfg, 21)
    assert [level.name for level in report.levels] == ["base", "level 2", "exact"]
    # corrections of a constant-rate network vanish path by path
    assert report.levels[1].variance == 0.0
    assert report.levels[2].variance == 0.0
    assert report.converged
    assert abs(report.estimate[0] - 10.0) < 4.0 * report.standard_deviation[0]
    assert report.estimator_variance[0] <= 0.25
    assert report.samples == sum(level.samples for level in report.levels)
    assert report.cost.total == sum(level.cost.total for level in report.levels)


def test_mlmc_agrees_with_direct():
    net = decay_network()
    functional = SpeciesAt(0, 1.0)
    cfg = MlmcConfig(M=4, ell0=1, L=2, T=1.0, target_sd=0.4, pilot=50)
    mlmc = estimate_mlmc(net, (100,), functional, cfg, 31)
    direct = estimate_expectation(net, (100,), functional, 1.0, 31, target_sd=0.4)
    assert mlmc.converged and direct.converged
    spread = math.sqrt(mlmc.estimator_variance[0] + direct.estimator_variance[0])
    assert abs(mlmc.estimate[0] - direct.estimate[0]) < 4.0 * spread
    assert abs(mlmc.estimate[0] - 100 * math.exp(-1.0)) < 4.0 * mlmc.standard_deviation[0]


def test_mlmc_without_exact_level_is_tau_leap_estimate():
    net = decay_network()
    cfg = MlmcConfig(M=2, ell0=0, L=0, T=1.0, target_sd=0.5, exact_level=False, pilot=20)
    report = estimate_mlmc(net, (100,), SpeciesAt(0, 1.0), cfg, 41)
    assert [level.name for level in report.levels] == ["base"]
    # one Euler step of the decay from 100 over the whole horizon empties the species on average
    assert report.estimate[0] < 20.0


def test_mlmc_reproducible_across_workers():
    net = birth_death_network()
    cfg = MlmcConfig(M=2, ell0=1, L=2, T=2.0, target_sd=0.3, pilot=20)
    a = estimate_mlmc(net, (0,), SpeciesAt(0, 2.0), cfg, 51, workers=1, batch_size=7)
    b = estimate_mlmc(net, (0,), SpeciesAt(0, 2.0), cfg, 51, workers=3, batch_size=7)
    assert a.estimate.tolist() == b.estimate.tolist()
    assert [level.samples for level in a.levels] == [level.samples for level in b.levels]


@pytest.mark.slow
def test_mmp_mlmc_against_direct():
    model = get_model("mmp")
    net = model.network()
    functional = SpeciesAt(0, 2.0, "S1")
    cfg = MlmcConfig(M=4, ell0=2, L=3, T=2.0, target_sd=0.1)
    mlmc = estimate_mlmc(net, model.default_initial, functional, cfg, 2024)
    direct = estimate_expectation(net, model.default_initial, functional, 2.0, 2024, target_sd=0.1)
    spread = math.sqrt(mlmc.estimator_variance[0] + direct.estimator_variance[0])
    assert abs(mlmc.estimate[0] - direct.estimate[0]) < 3.0 * spread
    assert direct.cost.total >= 10 * mlmc.cost.total


# E S_i(2) for the modulated binding model, each known to a standard deviation of 0.1
MMP_REFERENCE = [(0, 335.5), (1, 768.2), (2, 231.9), (3, 432.5)]


@pytest.mark.slow
@pytest.mark.parametrize("species, reference", MMP_REFERENCE)
def test_mmp_mlmc_reference_values(species, reference):
    model = get_model("mmp")
    net = model.network()
    functional = SpeciesAt(species, 2.0, net.species[species])
    cfg = MlmcConfig(M=4, ell0=2, L=3, T=2.0, target_sd=0.1)
    mlmc = estimate_mlmc(net, model.default_initial, functional, cfg, 2025 + species)
    assert mlmc.converged
    assert abs(mlmc.estimate[0] - reference) < 3.0 * math.sqrt(mlmc.estimator_variance[0] + 0.1 ** 2)


@pytest.mark.slow
def test_dimer_exact_decay_channel_cuts_mlmc_cost():
    model = get_model("dimer")
    net = model.network()
    functional = SpeciesAt(2, 5.0, "D")
    reports = {}
    for name, exact_channels in (("standard", ()), ("exact decay", (6,))):
        cfg = MlmcConfig(M=4, ell0=2, L=3, T=5.0, target_sd=0.05, exact_channels=exact_channels, pilot=50)
        reports[name] = estimate_mlmc(net, model.default_initial, functional, cfg, 61)
    direct = estimate_expectation(net, model.default_initial, functional, 5.0, 61, target_sd=0.05)
    assert 3 * reports["exact decay"].cost.total <= reports["standard"].cost.total
    for report in reports.values():
        assert report.converged
        spread = math.sqrt(report.estimator_variance[0] + direct.estimator_variance[0])
        assert abs(report.estimate[0] - direct.estimate[0]) < 3.0 * spread


@pytest.mark.slow
@pytest.mark.parametrize("parameter", ["m", "gamma", "R0", "s", "phi"])
def test_sir_extinction_sensitivity_stacked_variance_is_smallest(parameter):
    model = get_model("sir")
    net = model.network()
    functional = make_functional(net, "extinction", "I", 10.0)
    theta, h = model.parameters[parameter], model.perturbation(parameter)
    variances = {}
    for coupling in ("independent", "crn", "stacked"):
        job = SensitivityJob(model.family(parameter), theta, h, functional, coupling, 200, 10.0,
                             model.default_initial, parameter)
        variances[coupling] = estimate_sensitivity(job, 71).variance[0]
    assert variances["stacked"] <= variances["independent"]
    assert variances["stacked"] <= variances["crn"]


@pytest.mark.slow
def test_dimer_amplitude_sensitivity_matches_mean_equation():
    model = get_model("dimer")
    omega = 2 * math.pi / 24.0

    def family(theta):
        return model.network(amplitude=theta, translation=0.0)

    # d/damplitude E M solves s' = sin(omega t) - s, s(0) = 0
    solution = integrate.solve_ivp(lambda t, s: [math.sin(omega * t) - s[0]], (0.0, 20.0), [0.0],
                                   rtol=1e-10, atol=1e-12)
    exact = float(solution.y[0, -1])
    reports = {}
    for h, seed in ((0.1, 81), (0.05, 82)):
        job = SensitivityJob(family, 15.0, h, SpeciesAt(0, 20.0, "M"), "stacked", 1000, 20.0, (0, 0, 0),
                             "amplitude")
        reports[h] = estimate_sensitivity(job, seed)
    assert abs(reports[0.1].estimate[0] - exact) < 3.5 * reports[0.1].standard_deviation[0]
    spread = math.hypot(reports[0.1].standard_deviation[0], reports[0.05].standard_deviation[0])
    assert abs(reports[0.1].estimate[0] - reports[0.05].estimate[0]) < 3.0 * spread
