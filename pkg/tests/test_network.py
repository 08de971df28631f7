import numpy as np
import pytest

from inhomssa.simulator.catalog import get_model
from inhomssa.simulator.exact_sim import bind_network
from inhomssa.simulator.exceptions import ModelDefinitionError
from inhomssa.simulator.network import (PER_CHANNEL, TOTAL, EnvironmentModel, ReactionChannel, ReactionNetwork,
                                        apply_change, certify_bound, channel_propensities, make_state,
                                        total_propensity)
from inhomssa.simulator.propensity import (CallablePropensity, FrequencyPropensity, MassActionPropensity,
                                           PopulationPropensity, mass_action_propensity)
from inhomssa.simulator.randomness import RandomStream
from inhomssa.simulator.rates import ConstantRate, ModulatedRate, SinusoidalRate
from inhomssa.simulator.seasonality import BirthPulseRate
from inhomssa.simulator.trajectory import EnvironmentPath


def test_total_propensity_model1_at_start():
    net = get_model("model1").network()
    assert total_propensity(net, 0.0, make_state((0, 0))) == pytest.approx(60.0)


def test_total_propensity_dimer_at_crest():
    net = get_model("dimer").network()
    value = total_propensity(net, 6.0, make_state((0, 1000, 0)))
    assert value == pytest.approx(1075.14985, rel=1e-12)


def test_channel_propensities_dimer_at_crest():
    net = get_model("dimer").network()
    rates = channel_propensities(net, 6.0, make_state((0, 1000, 0)))
    assert rates == pytest.approx([75.0, 0.0, 0.0, 1000.0, 0.14985, 0.0], rel=1e-12)


def test_mass_action_linear():
    assert mass_action_propensity(100, {0: 1}, (3, 50)) == 300


def test_mass_action_absorbing_zero():
    assert mass_action_propensity(7.5, {1: 1}, (3, 0)) == 0
    assert mass_action_propensity(7.5, {0: 2}, (1, 5)) == 0


def test_mass_action_dimerization():
    assert mass_action_propensity(3e-7, {1: 2}, (0, 1000, 0)) == pytest.approx(0.14985, rel=1e-12)


def test_mass_action_time_dependent_rate():
    rate = SinusoidalRate(60, 15, 24)
    assert mass_action_propensity(rate, {}, (0,), t=6.0) == pytest.approx(75.0)


def test_mass_action_negative_rate():
    with pytest.raises(ModelDefinitionError):
        mass_action_propensity(lambda t: -1.0, {}, (0,))


@pytest.mark.parametrize("t0,t1", [(0.0, 20.0), (3.0, 5.0), (7.0, 11.0), (17.5, 20.0)])
def test_bounds_dominate_dense_grid(t0, t1):
    net = get_model("dimer").network()
    x = make_state((40, 900, 12))
    certificates = certify_bound(net, t0, t1, x, PER_CHANNEL)
    grid = np.linspace(t0, t1, 2001)
    for k, certificate in enumerate(certificates, start=1):
        assert t0 < certificate.escape_time <= t1
        values = [net.channels[k - 1].propensity.evaluate(t, x) for t in grid]
        assert max(values) <= certificate.bound_value * (1 + 1e-12)


@pytest.mark.slow
@pytest.mark.parametrize("name", ["model1", "dimer", "sir", "mmp"])
def test_catalog_bounds_dominate_random_windows(name):
    model = get_model(name)
    T = model.horizon_default
    net = bind_network(model.network(), T, RandomStream(21, (name,)))
    rng = np.random.default_rng(21)
    top = 200 if name == "sir" else 2000
    checked = 0
    while checked < 2500:
        t0 = rng.uniform(0.0, T)
        t1 = t0 + (T - t0) * (1.0 - rng.random())
        if not t1 > t0:
            continue
        x = make_state(rng.integers(0, top, size=net.species_count))
        for k, certificate in enumerate(certify_bound(net, t0, t1, x, PER_CHANNEL), start=1):
            assert t0 < certificate.escape_time <= t1
            grid = np.linspace(t0, certificate.escape_time, 100)
            values = [net.channels[k - 1].propensity.evaluate(t, x) for t in grid]
            assert max(values) <= certificate.bound_value * (1 + 1e-9), (k, t0, t1, x.tolist())
        checked += 1


def test_sinusoid_sup_is_tight_on_short_window():
    rate = SinusoidalRate(60, 15, 24)
    assert rate.sup(0.0, 24.0) == 75.0
    # sin is decreasing on [7, 11]
    assert rate.sup(7.0, 11.0) == pytest.approx(rate(7.0))
    assert rate.sup(5.0, 7.0) == 75.0


def test_birth_pulse_sup_covers_grid():
    rate = BirthPulseRate(10.0, 0.3, m=0.1)
    for t0, t1 in [(0.0, 0.2), (0.1, 0.9), (2.3, 2.4)]:
        grid = np.linspace(t0, t1, 1001)
        assert max(rate(t) for t in grid) <= rate.sup(t0, t1) * (1 + 1e-12)


def test_total_mode_sums_channels():
    net = get_model("model1").network()
    x = make_state((10, 30))
    per_channel = certify_bound(net, 0.0, 4.0, x, PER_CHANNEL)
    (total,) = certify_bound(net, 0.0, 4.0, x, TOTAL)
    assert total.bound_value == pytest.approx(sum(c.bound_value for c in per_channel))
    assert total.escape_time == min(c.escape_time for c in per_channel)


def test_certify_rejects_empty_window():
    net = get_model("model1").network()
    with pytest.raises(ModelDefinitionError):
        certify_bound(net, 2.0, 2.0, make_state((0, 0)))


def test_certify_rejects_bad_certificate():
    bad = CallablePropensity(lambda t, x: 1.0, lambda t0, t1, x: (1.0, t1 + 1.0))
    net = ReactionNetwork(("A",), (ReactionChannel((1,), bad),))
    with pytest.raises(ModelDefinitionError, match="invalid certificate"):
        certify_bound(net, 0.0, 1.0, make_state((0,)))


def test_negative_propensity_is_a_model_error():
    bad = CallablePropensity(lambda t, x: -0.5, lambda t0, t1, x: (0.0, t1))
    net = ReactionNetwork(("A",), (ReactionChannel((1,), bad, "broken"),))
    with pytest.raises(ModelDefinitionError, match="broken"):
        total_propensity(net, 0.0, make_state((0,)))


def test_network_validation():
    propensity = MassActionPropensity(1.0, {})
    with pytest.raises(ModelDefinitionError):
        ReactionNetwork(("A", "B"), (ReactionChannel((1,), propensity),))
    with pytest.raises(ModelDefinitionError):
        ReactionNetwork(("A",), ())
    with pytest.raises(ModelDefinitionError, match="environment"):
        ReactionNetwork(("A",), (ReactionChannel((1,), MassActionPropensity(ModulatedRate(1.0, (1.0, 2.0)), {})),))


def test_species_index():
    net = get_model("dimer").network()
    assert net.species_index("D") == 2
    assert net.species_index(1) == 1
    with pytest.raises(ModelDefinitionError, match="unknown species"):
        net.species_index("Q")
    with pytest.raises(ModelDefinitionError):
        net.species_index(3)


def test_make_state_and_apply_change():
    x = make_state((1, 2))
    assert x.dtype == np.int64
    assert apply_change(x, np.array([-1, 1])).tolist() == [0, 3]
    with pytest.raises(ModelDefinitionError):
        apply_change(x, np.array([-2, 0]))
    with pytest.raises(ModelDefinitionError):
        make_state((1, -1))
    with pytest.raises(ModelDefinitionError):
        make_state((1, 2), 3)


def test_environment_model_validation():
    with pytest.raises(ModelDefinitionError, match="diagonal"):
        EnvironmentModel((1.0, 2.0), ((0.5, 0.5), (1.0, 0.0)))
    with pytest.raises(ModelDefinitionError, match="distribution"):
        EnvironmentModel((1.0, 2.0), ((0.0, 0.9), (1.0, 0.0)))
    assert EnvironmentModel((3.0,), ((0.0,),)).initial_value == 3.0


def test_bind_environment_freezes_modulated_rate():
    net = get_model("mmp").network()
    path = EnvironmentPath((0.5,), (0.5, 5.0), 2.0)
    bound = net.bind_environment(path)
    x = make_state((10, 10, 0, 0))
    assert bound.channels[0].propensity.evaluate(0.2, x) == pytest.approx(0.001 * 0.5 * 100)
    assert bound.channels[0].propensity.evaluate(1.0, x) == pytest.approx(0.001 * 5.0 * 100)
    # the bound uses the largest level whatever the realization
    certificate = bound.channels[0].propensity.bound(0.0, 0.4, x)
    assert certificate.bound_value >= 0.001 * 5.0 * 100 - 1e-12


def test_population_and_frequency_kinetics():
    x = make_state((30, 10, 10))
    population = PopulationPropensity(ConstantRate(0.5))
    assert population.evaluate(0.0, x) == pytest.approx(25.0)
    frequency = FrequencyPropensity(ConstantRate(2.0), 0, 1)
    assert frequency.evaluate(0.0, x) == pytest.approx(2.0 * 30 * 10 / 50)
    assert frequency.evaluate(0.0, make_state((0, 0, 0))) == 0.0
