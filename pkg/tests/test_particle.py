import math

import numpy as np
import pytest
from scipy import integrate, stats

from superlab import presets
from superlab import semigroup as sg
from superlab import testfunctions as tf
from superlab.experiment import mean_se, run_paths, var_se
from superlab.model import ConfigurationError, InitialMeasure
from superlab.particle import (BirthDeath, CapacityError, SimConfig, check_epsilon, functional,
                               init_population, martingale_value, path_rng, simulate_path,
                               spawn_sizes, step_to)
from superlab.particle.engines import scheme_laplace_functional
from superlab.spectral import registry_lookup

ONE = tf.constant(1.0, "one")


def x_squared():
    from superlab.fields import Field
    return tf.Smooth(Field.squared_norm(1), "x2")


def test_init_population_examples():
    st = init_population(InitialMeasure.dirac(0.0), SimConfig(0.01))
    assert st.n == 100 and st.total_mass == pytest.approx(1.0)
    assert np.all(st.positions == 0.0)
    mu = InitialMeasure(((0.0, 0.5), (1.0, 0.5)))
    st = init_population(mu, SimConfig(0.25))
    assert st.n == 4
    np.testing.assert_array_equal(st.positions[:, 0], [0.0, 0.0, 1.0, 1.0])
    with pytest.raises(ConfigurationError):
        init_population(InitialMeasure.dirac(0.0, 0.3), SimConfig(0.2))
    with pytest.raises(CapacityError):
        init_population(InitialMeasure.dirac(0.0), SimConfig(0.01, max_particles=50))


def test_sim_config_validation():
    with pytest.raises(ConfigurationError):
        SimConfig(0.0)
    with pytest.raises(ConfigurationError):
        SimConfig(0.1, observation_times=(1.0, 0.5))
    with pytest.raises(ConfigurationError):
        SimConfig(0.1, engine="euler")


def test_functional_examples():
    st = init_population(InitialMeasure.dirac(0.0), SimConfig(0.01))
    assert functional(st, ONE) == pytest.approx(1.0)
    assert functional(st, tf.ball([0.0], 0.5)) == pytest.approx(1.0)
    st.n = 0
    assert functional(st, tf.gaussian(1.0, 1.0)) == 0.0


def test_martingale_value_examples():
    spec = presets.inward_ou()
    sd = registry_lookup(spec)
    st = init_population(spec.initial, SimConfig(0.01))
    assert martingale_value(st, sd) == pytest.approx(1.0)
    st.n = 0
    assert martingale_value(st, sd) == 0.0
    step_to(st, 2.0, spec, SimConfig(0.01))
    assert st.n == 0 and martingale_value(st, sd) == 0.0


def test_epsilon_checks():
    with pytest.raises(ConfigurationError, match="largest admissible epsilon is 0.5"):
        check_epsilon(presets.inward_ou(a=4.0), SimConfig(1.0))
    with pytest.raises(ConfigurationError, match="not resolved"):
        spawn_sizes(presets.inward_ou(atoms=[(1.0, 0.015)]), 0.01)
    np.testing.assert_array_equal(spawn_sizes(presets.inward_ou(atoms=[(1.0, 0.5)]), 0.01), [50])


@pytest.mark.parametrize("engine", ["thinning", "genealogy"])
def test_zero_branching_is_pure_motion(engine):
    spec = presets.inward_ou(a=0.0, b=0.0, x0=[0.8])
    cfg = SimConfig(0.01, seed=3, observation_times=(0.5, 1.0), engine=engine)
    st = init_population(spec.initial, cfg, path_rng(3, 0))
    step_to(st, 0.5, spec, cfg)
    assert st.n == 100
    step_to(st, 1.0, spec, cfg)
    assert st.n == 100 and st.total_mass == pytest.approx(1.0)
    # 100 particles per path, independent; pool 20 paths for the KS test
    pts = [st.positions[: st.n, 0]]
    for pid in range(1, 20):
        s = init_population(spec.initial, cfg, path_rng(3, pid))
        s = step_to(s, 1.0, spec, cfg)
        pts.append(s.positions[: s.n, 0])
    z = np.concatenate(pts)
    F, V = spec.spatial.moments(1.0)
    assert stats.kstest(z, stats.norm(0.8 * F, math.sqrt(V)).cdf).pvalue > 0.01


def test_zero_branching_record_is_constant():
    spec = presets.inward_ou(a=0.0, b=0.0)
    rec = simulate_path(spec, SimConfig(0.05, observation_times=(1.0, 2.0, 3.0)), [ONE])
    assert rec.value("one").tolist() == pytest.approx([1.0, 1.0, 1.0])


def test_reproducible_records():
    spec = presets.inward_ou()
    obs = [ONE, tf.gaussian(1.0, 1.0)]
    sd = registry_lookup(spec)
    for engine in ("thinning", "genealogy"):
        cfg = SimConfig(0.05, seed=11, observation_times=(0.5, 1.0), engine=engine)
        a = simulate_path(spec, cfg, obs, sd, path_id=4)
        b = simulate_path(spec, cfg, obs, sd, path_id=4)
        c = simulate_path(spec, cfg, obs, sd, path_id=5)
        assert repr(a.rows()) == repr(b.rows())
        assert a.rows() != c.rows()


def test_capacity_error_keeps_partial_record():
    spec = presets.inward_ou()
    cfg = SimConfig(0.01, max_particles=150, seed=1, observation_times=(0.1, 10.0), engine="thinning")
    with pytest.raises(CapacityError) as info:
        for pid in range(50):
            simulate_path(spec, cfg, [ONE], path_id=pid)
    err = info.value
    assert err.record is not None and not err.record.complete
    assert 0.1 <= err.time_reached <= 10.0
    rec = simulate_path(spec, cfg, [ONE], path_id=err.record.path_id, raise_on_capacity=False)
    assert not rec.complete and rec.times == [0.1]


def test_birth_death_pgf_against_kolmogorov_ode():
    spec = presets.inward_ou(a=1.0, b=1.0)
    bd = BirthDeath(spec, 0.1)
    T, s = 0.7, 0.6
    lam, mu = bd.lam, bd.mu
    sol = integrate.solve_ivp(lambda _t, F: [mu - (lam + mu) * F[0] + lam * F[0] ** 2], (0, T), [s],
                              rtol=1e-12, atol=1e-13)
    p, g = bd.survival(T), bd.geometric_ratio(T)
    closed = (1 - p) + p * (1 - g) * s / (1 - g * s)
    assert closed == pytest.approx(sol.y[0, -1], rel=1e-9)
    assert p / (1 - g) == pytest.approx(math.exp(bd.r * T), rel=1e-12)


def test_scheme_laplace_converges():
    spec = presets.inward_ou()
    target = math.exp(-sg.log_laplace_ode(spec, 2.0, 1.0))
    errs = [abs(scheme_laplace_functional(spec, e, 2.0, 1.0) - target) for e in (0.05, 0.02, 0.01)]
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 1e-5


@pytest.mark.parametrize("engine", ["thinning", "genealogy"])
def test_mean_mass_at_one(engine):
    spec = presets.inward_ou()
    cfg = SimConfig(0.02, seed=5, observation_times=(1.0,), engine=engine)
    recs = run_paths(spec, cfg, [ONE], None, 2000, workers=2)
    m, se = mean_se([r.values["one"][0] for r in recs])
    assert abs(m - math.e) < 3 * se


@pytest.mark.parametrize("engine", ["thinning", "genealogy"])
def test_spatial_moment(engine):
    spec = presets.inward_ou(x0=[0.5])
    f = x_squared()
    cfg = SimConfig(0.02, seed=8, observation_times=(0.7,), engine=engine)
    recs = run_paths(spec, cfg, [f], None, 1000, workers=2)
    m, se = mean_se([r.values["x2"][0] for r in recs])
    assert abs(m - sg.mean_under(spec, 0.7, f)) < 3 * se


def test_engines_agree_on_variance():
    spec = presets.inward_ou()
    vs = []
    for engine in ("thinning", "genealogy"):
        cfg = SimConfig(0.02, seed=2, observation_times=(1.0,), engine=engine)
        recs = run_paths(spec, cfg, [ONE], None, 2000, workers=2)
        vs.append(var_se([r.values["one"][0] for r in recs]))
    (v1, s1), (v2, s2) = vs
    assert abs(v1 - v2) < 3 * math.hypot(s1, s2)
    assert v2 == pytest.approx(9.3415, rel=0.1)


def test_spawn_channel_moments():
    spec = presets.inward_ou(a=1.0, b=0.5, atoms=[(1.0, 0.5)])
    cfg = SimConfig(0.02, seed=4, observation_times=(1.0,))
    recs = run_paths(spec, cfg, [ONE], None, 2000, workers=2)
    x = [r.values["one"][0] for r in recs]
    m, se = mean_se(x)
    assert abs(m - math.e) < 3 * se
    v, vse = var_se(x)
    target = sg.variance_closed_form(1.25, 1.0, 1.0)
    assert abs(v - target) < 3 * vse + 0.1 * target
