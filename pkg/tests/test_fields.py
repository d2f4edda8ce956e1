import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from superlab import Field

finite = st.floats(-2.0, 2.0, allow_nan=False)


def quad_normal(fn, m, s):
    val, _ = integrate.quad(lambda z: fn(m + s * z) * math.exp(-z * z / 2) / math.sqrt(2 * math.pi),
                            -np.inf, np.inf, epsabs=1e-13, epsrel=1e-12)
    return val


def test_constructors_evaluate():
    x = np.array([[0.5, -1.0]])
    assert Field.constant(2.5)(x)[0] == 2.5
    assert Field.coordinate(1, 2)(x)[0] == -1.0
    assert Field.squared_norm(2)(x)[0] == pytest.approx(1.25)
    g = Field.gaussian(3.0, 0.5, dim=2)
    assert g(x)[0] == pytest.approx(3.0 * math.exp(-0.5 * 1.25))


def test_algebra_matches_pointwise():
    x = np.linspace(-2, 2, 9)[:, None]
    f = Field.gaussian(1.0, 0.7) * (Field.coordinate(0, 1) + 2.0) - 0.5
    expected = np.exp(-0.7 * x[:, 0] ** 2) * (x[:, 0] + 2.0) - 0.5
    np.testing.assert_allclose(f(x), expected, rtol=1e-14)


@settings(max_examples=40, deadline=None)
@given(m=finite, s=st.floats(0.05, 3.0), q=st.floats(-0.1, 2.0), p=st.integers(0, 4))
def test_expect_normal_against_adaptive_quadrature(m, s, q, p):
    f = Field.gaussian(1.3, q) * Field.monomial(1.0, [p])
    if 1 + 2 * q * s * s <= 0.05:
        return
    exact = float(f.expect_normal(np.array([[m]]), s)[0])
    def integrand(z):
        y = m + s * z
        return 1.3 * y ** p * math.exp(-q * y * y - z * z / 2) / math.sqrt(2 * math.pi)

    ref, _ = integrate.quad(integrand, -np.inf, np.inf, epsabs=1e-13, epsrel=1e-12)
    assert exact == pytest.approx(ref, rel=1e-9, abs=1e-12)


def test_expect_normal_narrow_gaussian_under_wide_law():
    # the regime where fixed-order Gauss-Hermite loses accuracy
    f = Field.gaussian(1.0, 50.0)
    got = float(f.expect_normal(np.array([[0.3]]), 4.0)[0])
    ref = quad_normal(lambda y: math.exp(-50 * y * y), 0.3, 4.0)
    assert got == pytest.approx(ref, rel=1e-10)


def test_expect_normal_rejects_divergent():
    with pytest.raises(ValueError):
        Field.gaussian(1.0, -1.0).expect_normal(np.zeros((1, 1)), 2.0)


def test_lebesgue_integral():
    f = Field.gaussian(2.0, 0.5) * Field.squared_norm(1)
    ref, _ = integrate.quad(lambda y: 2 * math.exp(-0.5 * y * y) * y * y, -np.inf, np.inf)
    assert f.lebesgue_integral(1) == pytest.approx(ref, rel=1e-12)
    with pytest.raises(ValueError):
        Field.constant(1.0).lebesgue_integral(1)


def test_fields_are_immutable():
    f = Field.constant(1.0)
    with pytest.raises(AttributeError):
        f.terms = ()
