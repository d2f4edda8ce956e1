import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from superlab import presets
from superlab.fields import Field
from superlab.model import (Atom, Bounds, BranchingMechanism, ConfigurationError, InitialMeasure,
                            alpha_of, big_a_of, k_bound, max_admissible_epsilon, psi_eval,
                            validate_model)


def mech(a=1.0, b=1.0, beta=1.0, atoms=()):
    return BranchingMechanism(a=a, b=b, beta=beta, atoms=tuple(Atom(w, y) for w, y in atoms))


def test_psi_examples():
    x = np.zeros(1)
    assert psi_eval(mech(), x, 0.0) == 0.0
    assert psi_eval(mech(), x, 1.0) == 0.0
    assert psi_eval(mech(0, 0, atoms=[(1, 1)]), x, 1.0) == pytest.approx(math.exp(-1), rel=1e-14)


def test_psi_negative_lambda_rejected():
    with pytest.raises(ValueError):
        psi_eval(mech(), np.zeros(1), -0.1)


def test_alpha_and_big_a_examples():
    x = np.array([0.3])
    assert alpha_of(mech(a=1, beta=1), x) == 1.0
    assert alpha_of(mech(a=0.5, beta=2), np.array([7.0])) == 1.0
    assert big_a_of(mech(b=1), x) == 2.0
    assert big_a_of(mech(b=0, atoms=[(3, 2)]), x) == 12.0


def test_k_bound_examples():
    assert k_bound(mech(1, 1, 1)) == 3.0
    assert k_bound(mech(0, 0, 1)) == 0.0
    assert k_bound(mech(1, 0.5, 1, atoms=[(1, 1)])) == 3.0


def test_k_bound_needs_declared_bounds():
    varying = BranchingMechanism(a=Field.gaussian(1.0, 1.0) * Field.coordinate(0, 1), b=1.0)
    assert varying.bounds is None
    with pytest.raises(ConfigurationError):
        k_bound(varying)


coef = st.floats(-2.0, 2.0)
pos = st.floats(0.0, 2.0)
atom_list = st.lists(st.tuples(st.floats(0.0, 2.0), st.floats(0.1, 2.0)), max_size=3)


@settings(max_examples=60, deadline=None)
@given(a=coef, b=pos, beta=st.floats(0.1, 3.0), atoms=atom_list, lam=st.floats(0.0, 5.0))
def test_psi_invariants(a, b, beta, atoms, lam):
    m = mech(a, b, beta, atoms)
    x = np.array([0.4])
    assert psi_eval(m, x, 0.0) == 0.0
    # convex in lambda: second difference is nonnegative
    h = 1e-2
    second = psi_eval(m, x, lam + 2 * h) - 2 * psi_eval(m, x, lam + h) + psi_eval(m, x, lam)
    assert second >= -1e-12
    # finite differences recover alpha and A
    h = 1e-6
    assert -beta * psi_eval(m, x, h) / h == pytest.approx(alpha_of(m, x), abs=1e-4)
    h = 1e-3
    d2 = beta * (psi_eval(m, x, 2 * h) - 2 * psi_eval(m, x, h)) / h ** 2
    assert d2 == pytest.approx(big_a_of(m, x), rel=1e-2, abs=1e-6)
    assert k_bound(m) >= abs(alpha_of(m, x)) + big_a_of(m, x) - 1e-12


def test_max_admissible_epsilon():
    assert max_admissible_epsilon(mech(a=4, b=1)) == 0.5
    assert max_admissible_epsilon(mech(a=0, b=1)) == math.inf


def test_declared_bounds_must_match_atoms():
    with pytest.raises(ConfigurationError):
        BranchingMechanism(a=1.0, b=1.0, atoms=(Atom(1.0, 1.0),), bounds=Bounds(1, 1, 1, ()))


def test_initial_measure():
    mu = InitialMeasure(((0.0, 0.5), (1.0, 0.5)))
    assert mu.total_mass == 1.0
    assert mu.dim == 1
    with pytest.raises(ValueError):
        InitialMeasure(((0.0, -1.0),))
    with pytest.raises(ValueError):
        InitialMeasure(())


def test_validate_inward_preset_passes():
    report = validate_model(presets.inward_ou())
    assert report.passed, report.summary()
    assert report["supercritical (lambda0 > 0)"].value == 1.0


def test_validate_outward_critical_fails():
    report = validate_model(presets.outward_ou(beta=1.0, c=1.0))
    assert not report["supercritical (lambda0 > 0)"].passed


def test_validate_negative_b_fails():
    spec = presets.inward_ou(b=-1.0)
    report = validate_model(spec)
    assert not report["nonnegativity of b, w, beta"].passed
    assert not report.passed
