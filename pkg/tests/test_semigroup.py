import math

import numpy as np
import pytest
from scipy import integrate, optimize, sparse
from scipy.sparse.linalg import splu

from superlab import presets
from superlab import semigroup as sg
from superlab import testfunctions as tf
from superlab.fields import Field
from superlab.model import BranchingMechanism, ModelSpec, k_bound
from superlab.spatial import MotionKind, SpatialMotion
from superlab.spectral import registry_lookup

VAR_T1 = 9.341548540943203  # 2 e^2 (1 - e^-1)
LOGISTIC_T1 = 1.2253996735605641  # 2e / (1 + 2(e - 1))


def test_mean_of_constant():
    spec = presets.inward_ou()
    for t in (0.0, 0.5, 2.0):
        assert sg.mean_semigroup(spec, t, tf.constant(), [0.3]) == pytest.approx(math.exp(t), rel=1e-14)


def test_mean_at_time_zero_is_identity():
    f = tf.gaussian(1.0, 0.8, center=[0.2])
    x = np.linspace(-2, 2, 7)[:, None]
    np.testing.assert_array_equal(sg.mean_semigroup(presets.outward_ou(), 0.0, f, x), f(x))


def test_mean_of_coordinate_closed_form():
    spec = presets.inward_ou(c=2.0)
    for t in (0.3, 1.5):
        assert sg.mean_semigroup(spec, t, tf.coordinate(), [0.7]) == pytest.approx(
            math.exp(t) * 0.7 * math.exp(-2.0 * t), rel=1e-13)


def test_variable_alpha_rejected():
    mech = BranchingMechanism(a=Field.gaussian(1.0, 1.0), b=1.0)
    spec = ModelSpec(SpatialMotion(MotionKind.INWARD, 1.0), mech)
    with pytest.raises(sg.UnsupportedModelError):
        sg.mean_semigroup(spec, 1.0, tf.constant(), [0.0])


def test_variance_closed_form_value():
    assert sg.variance_closed_form(2.0, 1.0, 1.0) == pytest.approx(VAR_T1, rel=1e-15)
    assert VAR_T1 == pytest.approx(9.3414, abs=2e-4)  # quoted value is truncated


def test_variance_oracle_matches_closed_form():
    spec = presets.inward_ou()
    assert sg.variance_oracle(spec, 1.0, tf.constant(), [0.0]) == pytest.approx(VAR_T1, rel=1e-10)
    assert sg.variance_oracle(spec, 0.0, tf.constant(), [0.0]) == 0.0


def test_variance_oracle_for_coordinate():
    # independent route: scalar quadrature of A exp(2(alpha-c)(t-s)) T_s[x^2]
    alpha, c, A, t, x0 = 1.0, 1.0, 2.0, 1.5, 0.6
    spec = presets.inward_ou(c=c)

    def integrand(s):
        second = math.exp(alpha * s) * (math.exp(-2 * c * s) * x0 ** 2 + -math.expm1(-2 * c * s) / (2 * c))
        return A * math.exp(2 * (alpha - c) * (t - s)) * second

    ref, _ = integrate.quad(integrand, 0, t, epsabs=1e-14, epsrel=1e-13)
    assert sg.variance_oracle(spec, t, tf.coordinate(), [x0]) == pytest.approx(ref, rel=1e-9)


@pytest.mark.parametrize("spec", [presets.inward_ou(), presets.outward_ou(), presets.htransform_ou()],
                         ids=["inward", "outward", "htransform"])
@pytest.mark.parametrize("t", [0.5, 2.0])
def test_variance_bound(spec, t):
    K = k_bound(spec.branching)
    f = tf.gaussian(1.0, 0.5)
    for x in (-1.0, 0.0, 0.8):
        var = sg.variance_oracle(spec, t, f, [x])
        bound = math.exp(K * t) * sg.mean_semigroup(spec, t, tf.square(f), [x])
        assert 0 <= var <= bound


@pytest.mark.parametrize("spec", presets.default_registry_models(), ids=lambda s: s.name)
def test_eigenfunction_identities(spec):
    sd = registry_lookup(spec)
    phi = tf.Smooth(sd.phi0, "phi0")
    x = np.linspace(-1.5, 1.5, 7)[:, None]
    for t in (0.3, 1.0, 2.5):
        np.testing.assert_allclose(sg.mean_semigroup(spec, t, phi, x),
                                   math.exp(sd.lambda0 * t) * sd.phi0(x), rtol=1e-10)
    q = max(3.0, spec.alpha_constant + 1.0)
    np.testing.assert_allclose(sg.resolvent(spec, q, phi, x), sd.phi0(x) / (q - sd.lambda0), rtol=1e-8)


def test_resolvent_of_constant():
    assert sg.resolvent(presets.inward_ou(), 3.0, tf.constant(), [0.0]) == pytest.approx(0.5, rel=1e-9)


def test_resolvent_domain():
    with pytest.raises(ValueError):
        sg.resolvent(presets.inward_ou(), 1.0, tf.constant(), [0.0])
    with pytest.raises(ValueError):
        sg.resolvent(presets.outward_ou(), 3.0, tf.constant(), [0.0])


def test_h_semigroup_conservative():
    x = np.linspace(-2, 2, 5)[:, None]
    for spec in (presets.inward_ou(), presets.outward_ou()):
        np.testing.assert_allclose(sg.h_semigroup(spec, 0.7, tf.constant(), x), 1.0, rtol=1e-12)


def test_h_semigroup_inward_is_motion_semigroup():
    spec = presets.inward_ou()
    f = tf.gaussian(1.0, 1.0, center=[0.5])
    F, V = spec.spatial.moments(0.4)
    for x0 in (-1.0, 0.2):
        ref, _ = integrate.quad(lambda y: f(np.array([[y]]))[0] * math.exp(-(y - F * x0) ** 2 / (2 * V)),
                                -12, 12, epsabs=1e-14)
        ref /= math.sqrt(2 * math.pi * V)
        assert sg.h_semigroup(spec, 0.4, f, [x0]) == pytest.approx(ref, abs=1e-10)


def test_h_semigroup_outward_is_inward_ou():
    spec = presets.outward_ou()
    inward = presets.inward_ou(c=1.0)
    f = tf.gaussian(1.0, 0.7)
    x = np.linspace(-1.5, 1.5, 7)[:, None]
    for t in (0.2, 1.0):
        np.testing.assert_allclose(sg.h_semigroup(spec, t, f, x),
                                   math.exp(-t) * sg.mean_semigroup(inward, t, f, x), rtol=1e-8)


def test_feller_examples():
    spec = presets.inward_ou()
    f = tf.gaussian(1.0, 1.0)
    grid = np.linspace(-4, 4, 161)[:, None]
    rep = sg.feller_check(spec, f, [0.1, 0.01, 0.001], grid)
    assert rep.monotone
    assert rep.final_ratio < 0.05
    zero = sg.feller_check(spec, 0.0 * f, [0.1, 0.01], grid)
    assert zero.gaps == [0.0, 0.0]
    with pytest.raises(ValueError):
        sg.feller_check(spec, tf.ball([0.0], 1.0), [0.1], grid)


def test_log_laplace_examples():
    spec = presets.inward_ou()
    assert sg.log_laplace_ode(spec, 1.0, 3.0) == pytest.approx(1.0, abs=1e-9)
    assert sg.log_laplace_ode(spec, 2.0, 1.0) == pytest.approx(LOGISTIC_T1, abs=1e-9)
    assert sg.logistic_solution(1, 1, 1, 2.0, 1.0) == pytest.approx(LOGISTIC_T1, rel=1e-15)
    assert sg.log_laplace_ode(spec, 0.0, 1.0) == 0.0


@pytest.mark.parametrize("theta,t", [(0.5, 0.5), (3.0, 2.0), (10.0, 0.1)])
def test_ode_agrees_with_logistic(theta, t):
    spec = presets.inward_ou(a=0.7, b=1.3, beta=1.5)
    assert sg.log_laplace_ode(spec, theta, t) == pytest.approx(
        sg.logistic_solution(0.7, 1.3, 1.5, theta, t), rel=1e-8)


def test_log_laplace_rejects_varying_coefficients():
    with pytest.raises(sg.UnsupportedModelError):
        sg.log_laplace_ode(presets.htransform_ou(), 1.0, 1.0)


def test_extinction_examples():
    assert sg.extinction_probability(presets.inward_ou()).probability == pytest.approx(math.exp(-1), rel=1e-14)
    assert sg.extinction_probability(presets.inward_ou(a=2.0)).probability == pytest.approx(0.13534, abs=5e-6)
    assert sg.extinction_probability(presets.inward_ou(a=1e-6)).probability == pytest.approx(1.0, abs=1e-5)
    det = sg.extinction_probability(presets.inward_ou(b=0.0))
    assert det.probability == 0.0 and det.deterministic


def test_extinction_with_atom_matches_root_of_psi():
    # extinction probability is exp(-lambda*) with lambda* the positive root of psi
    spec = presets.inward_ou(a=1.0, b=0.5, atoms=[(1.0, 1.0)])
    root = optimize.brentq(lambda lam: 0.5 * lam ** 2 + math.expm1(-lam), 0.1, 10.0, xtol=1e-14)
    got = sg.extinction_probability(spec)
    assert got.method == "ode limit"
    assert got.probability == pytest.approx(math.exp(-root), abs=1e-7)


def _crank_nicolson(c, c1, c2, f, t, L=6.0, n=2401, dt=5e-4):
    """u_t = u''/2 - c x u' + (c1 x^2 + c2) u on [-L, L] with zero boundary values."""
    x = np.linspace(-L, L, n)
    h = x[1] - x[0]
    xi = x[1:-1]
    lower = 0.5 / h ** 2 + c * xi[1:] / (2 * h)
    upper = 0.5 / h ** 2 - c * xi[:-1] / (2 * h)
    diag = -1.0 / h ** 2 + c1 * xi ** 2 + c2
    op = sparse.diags([lower, diag, upper], [-1, 0, 1], format="csc")
    eye = sparse.identity(xi.size, format="csc")
    lu = splu((eye - 0.5 * dt * op).tocsc())
    rhs_op = eye + 0.5 * dt * op
    u = f(xi)
    for _ in range(int(round(t / dt))):
        u = lu.solve(rhs_op @ u)
    return xi, u


def test_htransform_two_routes():
    spec = presets.htransform_ou()
    f = tf.gaussian(1.0, 1.0)
    xi, u = _crank_nicolson(3.0, 2.0, 1.0, lambda y: np.exp(-y * y), 0.5)
    xs = np.array([-0.5, 0.0, 0.4])
    ref = np.interp(xs, xi, u)
    got = sg.original_mean(spec, 0.5, f, xs[:, None])
    np.testing.assert_allclose(got, ref, rtol=2e-4)


def test_htransform_mass_growth():
    # E <h, X_t> = h T^h_t 1 grows exactly at rate lambda_c
    spec = presets.htransform_ou()
    h = tf.Smooth(spec.htransform.h, "h")
    lam = spec.htransform.lambda_c
    for t in (0.5, 2.0):
        assert sg.original_mean(spec, t, h, [0.3]) == pytest.approx(
            math.exp(lam * t) * float(spec.htransform.h(np.array([[0.3]]))[0]), rel=1e-10)


def test_oracle_rows_shape():
    rows = sg.oracle_rows(presets.inward_ou(), [tf.constant()], [1.0], [[0.0], [1.0]])
    assert len(rows) == 6
    var = [r["value"] for r in rows if r["quantity"] == "variance"]
    np.testing.assert_allclose(var, VAR_T1, rtol=1e-10)


@pytest.mark.parametrize("t", [0.5, 2.0])
def test_log_laplace_derivative_is_mean(t):
    spec = presets.inward_ou(a=1.0, b=0.5, atoms=[(1.0, 1.0)])
    h = 1e-5
    # d/dtheta u_theta(t) at theta = 0 by a second-order one-sided difference (u_0 = 0)
    slope = (4 * sg.log_laplace_ode(spec, h, t) - sg.log_laplace_ode(spec, 2 * h, t)) / (2 * h)
    assert slope == pytest.approx(math.exp(t), rel=1e-4)
