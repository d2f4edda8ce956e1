"""Deterministic oracles for the moments of the superprocess.

Everything here is quadrature-grade: Gauss-Hermite in space against the
exact OU transition, composite Gauss-Legendre in time, and an adaptive
Runge-Kutta solver for the spatially homogeneous log-Laplace equation.

Only models with constant ``alpha = beta a`` are handled directly; the
variable-rate OU example enters through its h-transformed representation.
"""

from __future__ import annotations

from dataclasses import dataclass
import math
from typing import NamedTuple, Sequence

import numpy as np
from scipy.integrate import solve_ivp

from .model import ModelSpec, big_a_field, psi_eval
from .fields import Field
from .quadrature import QuadratureSpec, gauss_hermite, legendre_panels
from .spectral import SpectralData, registry_lookup
from .testfunctions import TestFunction, scaled, square


class UnsupportedModelError(ValueError):
    """The oracle has no quadrature route for this model."""


class NumericalFailure(ArithmeticError):
    """A quadrature result violated a structural constraint."""


def _alpha(spec: ModelSpec) -> float:
    alpha = spec.alpha_constant
    if alpha is None:
        raise UnsupportedModelError(
            "mean-semigroup oracles need constant alpha = beta*a; use the h-transformed preset")
    return alpha


def _points(x, d: int) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=float)
    single = x.ndim <= 1
    pts = x.reshape(1, d) if single else x.reshape(-1, d)
    return pts, single


def transition_expectation(spec: ModelSpec, t: float, f: TestFunction, pts: np.ndarray,
                           quad: QuadratureSpec) -> np.ndarray:
    """``P_t f`` at each row of ``pts``."""
    if t == 0:
        return f(pts)
    F, V = spec.spatial.moments(t)
    return f.expect_gaussian(F * pts, math.sqrt(V), quad)


def mean_semigroup(spec: ModelSpec, t: float, f: TestFunction, x,
                   quad: QuadratureSpec | None = None):
    """``T_t f(x) = exp(alpha t) P_t f(x)``, the first moment of ``<f, X_t>`` under ``delta_x``."""
    quad = quad or QuadratureSpec()
    if t < 0:
        raise ValueError("time must be nonnegative")
    alpha = _alpha(spec)
    pts, single = _points(x, spec.spatial.d)
    out = math.exp(alpha * t) * transition_expectation(spec, t, f, pts, quad)
    return float(out[0]) if single else out


def variance_oracle(spec: ModelSpec, t: float, f: TestFunction, x,
                    quad: QuadratureSpec | None = None):
    """``Var_{delta_x} <f, X_t> = int_0^t T_s[A (T_{t-s} f)^2](x) ds``.

    The time integral uses Gauss-Legendre panels refined geometrically toward
    ``s = t``; both semigroups are evaluated by nested Gauss-Hermite rules
    (exact Gaussian laws for ball indicators).
    """
    quad = quad or QuadratureSpec()
    if t < 0:
        raise ValueError("time must be nonnegative")
    _alpha(spec)
    pts, single = _points(x, spec.spatial.d)
    if t == 0:
        out = np.zeros(len(pts))
        return 0.0 if single else out
    total = _variance_integral(spec, t, f, pts, quad, big_a_field(spec.branching))
    if np.any(total < -quad.tol * max(1.0, float(np.max(np.abs(total))))):
        raise NumericalFailure(f"negative variance from quadrature: {total.min():.3e}")
    total = np.maximum(total, 0.0)
    return float(total[0]) if single else total


def _variance_integral(spec: ModelSpec, t: float, f: TestFunction, pts: np.ndarray,
                       quad: QuadratureSpec, weight: Field) -> np.ndarray:
    """``int_0^t T_s[weight (T_{t-s} f)^2](x) ds`` at each row of ``pts``."""
    alpha = _alpha(spec)
    d = spec.spatial.d
    s_nodes, s_weights = legendre_panels(0.0, t, quad.panels, quad.panel_order, refine="right")
    z, wz = gauss_hermite(quad.order, d)
    total = np.zeros(len(pts))
    for s, ws in zip(s_nodes, s_weights):
        F, V = spec.spatial.moments(s)
        ys = (F * pts)[:, None, :] + math.sqrt(V) * z[None, :, :]
        flat = ys.reshape(-1, d)
        inner = math.exp(alpha * (t - s)) * transition_expectation(spec, t - s, f, flat, quad)
        g = weight(flat) * inner ** 2
        total += ws * math.exp(alpha * s) * (g.reshape(len(pts), -1) @ wz)
    return total


def variance_closed_form(A: float, alpha: float, t: float) -> float:
    """``Var <1, X_t>`` for constant coefficients and unit initial mass."""
    if alpha == 0:
        return A * t
    return A * math.exp(2 * alpha * t) * (-math.expm1(-alpha * t)) / alpha


def _lambda0_or_alpha(spec: ModelSpec, alpha: float) -> float:
    try:
        return registry_lookup(spec).lambda0
    except LookupError:
        return alpha


def resolvent(spec: ModelSpec, q: float, f: TestFunction, x,
              quad: QuadratureSpec | None = None):
    """``U_q f(x) = int_0^inf exp(-q s) T_s f(x) ds``, truncated at ``T_max``.

    The domain is ``q > max(alpha, lambda0)``, which makes the integral
    absolutely convergent for bounded ``f``.  The truncation horizon follows
    from ``|exp(-q s) T_s f| <= exp(-(q - alpha) s) sup|f|``.
    """
    quad = quad or QuadratureSpec()
    alpha = _alpha(spec)
    lam0 = _lambda0_or_alpha(spec, alpha)
    floor = max(alpha, lam0)
    if not q > floor:
        raise ValueError(f"resolvent needs q > max(alpha, lambda0) = {floor:g}, got q = {q:g}")
    pts, single = _points(x, spec.spatial.d)
    rate = q - alpha
    sup = f.sup_bound if f.sup_bound is not None else 1.0
    t_max = quad.t_max or math.log(max(sup, 1e-300) / (rate * quad.tol)) / rate
    t_max = max(t_max, 1e-12)
    # refine toward s = 0, where P_s f changes fastest
    s_nodes, s_weights = legendre_panels(0.0, t_max, 2 * quad.panels, quad.panel_order,
                                         refine="left", ratio=0.6)
    total = np.zeros(len(pts))
    for s, ws in zip(s_nodes, s_weights):
        total += ws * math.exp(-rate * s) * transition_expectation(spec, s, f, pts, quad)
    return float(total[0]) if single else total


def h_semigroup(spec: ModelSpec, t: float, f: TestFunction, x,
                quad: QuadratureSpec | None = None, sd: SpectralData | None = None):
    """``T^{phi0}_t f(x) = exp(-lambda0 t) T_t(f phi0)(x) / phi0(x)``."""
    quad = quad or QuadratureSpec()
    sd = sd or registry_lookup(spec)
    pts, single = _points(x, spec.spatial.d)
    fphi = f if sd.phi0.is_constant and sd.phi0.constant_value() == 1.0 else scaled(f, sd.phi0)
    out = math.exp(-sd.lambda0 * t) * mean_semigroup(spec, t, fphi, pts, quad) / sd.phi0(pts)
    return float(out[0]) if single else out


def original_mean(spec: ModelSpec, t: float, f: TestFunction, x,
                  quad: QuadratureSpec | None = None):
    """First moment of ``<f, X_t>`` for the original process of the h-transform preset.

    ``X = X^h / h``, so ``E_{delta_x} <f, X_t> = h(x) T^h_t(f/h)(x)``.
    """
    ht = spec.htransform
    if ht is None:
        return mean_semigroup(spec, t, f, x, quad)
    pts, single = _points(x, spec.spatial.d)
    out = ht.h(pts) * mean_semigroup(spec, t, scaled(f, ht.h_inverse), pts, quad)
    return float(out[0]) if single else out


@dataclass
class FellerReport:
    times: list[float]
    gaps: list[float]
    sup_f: float

    @property
    def monotone(self) -> bool:
        return all(b < a for a, b in zip(self.gaps, self.gaps[1:])) or all(g == 0 for g in self.gaps)

    @property
    def final_ratio(self) -> float:
        return self.gaps[-1] / self.sup_f if self.sup_f > 0 else 0.0


def feller_check(spec: ModelSpec, f: TestFunction, t_sequence: Sequence[float], grid,
                 quad: QuadratureSpec | None = None, sd: SpectralData | None = None) -> FellerReport:
    """Sup-norm gaps ``max_grid |T^{phi0}_t f - f|`` along a decreasing time sequence."""
    if not f.c0:
        raise ValueError(f"{f.name} is not flagged C_0 (continuous, vanishing at infinity)")
    quad = quad or QuadratureSpec()
    pts, _ = _points(grid, spec.spatial.d)
    fx = f(pts)
    gaps = [float(np.max(np.abs(h_semigroup(spec, t, f, pts, quad, sd) - fx))) for t in t_sequence]
    return FellerReport(list(t_sequence), gaps, float(np.max(np.abs(fx))))


# moments under a finite initial measure -------------------------------------

def mean_under(spec: ModelSpec, t: float, f: TestFunction, quad: QuadratureSpec | None = None) -> float:
    """``E_mu <f, X_t> = sum_j m_j T_t f(x_j)`` for the model's initial measure."""
    mu = spec.initial
    vals = np.atleast_1d(mean_semigroup(spec, t, f, mu.positions(), quad))
    return float(mu.masses() @ vals)


def variance_under(spec: ModelSpec, t: float, f: TestFunction, quad: QuadratureSpec | None = None) -> float:
    """``Var_mu <f, X_t>``; independent atoms contribute additively."""
    mu = spec.initial
    vals = np.atleast_1d(variance_oracle(spec, t, f, mu.positions(), quad))
    return float(mu.masses() @ vals)


def scheme_variance_excess(spec: ModelSpec, t: float, f: TestFunction, epsilon: float,
                           quad: QuadratureSpec | None = None) -> float:
    """Exact ``Var^eps - Var`` of the binary mass-eps scheme for constant coefficients.

    From the second-moment equation of the branching particle system:
    ``eps [T_t f^2 - (T_t f)^2 + int_0^t T_s[alpha (T_{t-s} f)^2] ds]`` per
    unit mass.  It vanishes for ``f = 1``.
    """
    quad = quad or QuadratureSpec()
    alpha = _alpha(spec)
    k = spec.branching.constants()
    if k["atoms"]:
        raise UnsupportedModelError("the excess formula covers binary mechanisms only")
    mu = spec.initial
    pts = mu.positions()
    first = np.atleast_1d(mean_semigroup(spec, t, square(f), pts, quad))
    mean = np.atleast_1d(mean_semigroup(spec, t, f, pts, quad))
    cross = _variance_integral(spec, t, f, pts, quad, Field.constant(alpha))
    return float(epsilon * mu.masses() @ (first - mean ** 2 + cross))


# log-Laplace equation ------------------------------------------------------

def _homogeneous(spec: ModelSpec) -> dict:
    if not spec.branching.is_homogeneous:
        raise UnsupportedModelError("the log-Laplace ODE needs spatially homogeneous branching")
    return spec.branching.constants()


ODE_TOL = 1e-10


def log_laplace_ode(spec: ModelSpec, theta: float, t: float) -> float:
    """``u_theta(t)`` solving ``u' = -beta psi(u)``, ``u(0) = theta``.

    Then ``E_mu exp(-theta <1, X_t>) = exp(-u_theta(t) |mu|)``.
    """
    if theta < 0 or t < 0:
        raise ValueError("theta and t must be nonnegative")
    k = _homogeneous(spec)
    beta = k["beta"]
    if theta == 0 or t == 0:
        return float(theta)
    x0 = np.zeros(spec.spatial.d)
    rhs = lambda _s, u: [-beta * psi_eval(spec.branching, x0, max(u[0], 0.0))]  # noqa: E731
    sol = solve_ivp(rhs, (0.0, t), [theta], method="DOP853", rtol=ODE_TOL, atol=ODE_TOL)
    if not sol.success:
        raise NumericalFailure(sol.message)
    return float(sol.y[0, -1])


def logistic_solution(a: float, b: float, beta: float, theta: float, t: float) -> float:
    """Closed form of the quadratic log-Laplace equation (no jump atoms)."""
    r = a * beta
    if r == 0:
        return theta / (1 + beta * b * theta * t)
    e = math.exp(r * t)
    return a * theta * e / (a + b * theta * (e - 1))


class Extinction(NamedTuple):
    probability: float
    deterministic: bool = False
    method: str = "closed form"


def extinction_probability(spec: ModelSpec, theta: float = 1e6, tol: float = 1e-8) -> Extinction:
    """Probability that ``X`` started from unit mass eventually dies out.

    Quadratic mechanisms use ``exp(-a/b)``; with jump atoms the value is the
    ``theta -> inf, t -> inf`` limit of the log-Laplace equation.
    """
    k = _homogeneous(spec)
    a, b, atoms = k["a"], k["b"], k["atoms"]
    if b == 0 and not atoms:
        if a > 0:
            return Extinction(0.0, True, "deterministic growth")
        return Extinction(1.0, True, "deterministic decay")
    if a <= 0:
        return Extinction(1.0, False, "subcritical or critical")
    if not atoms:
        return Extinction(math.exp(-a / b), False, "closed form")
    t = 1.0 / (a * k["beta"])
    prev = log_laplace_ode(spec, theta, t)
    while True:
        t *= 2
        cur = log_laplace_ode(spec, theta, t)
        if abs(cur - prev) < tol:
            return Extinction(math.exp(-cur), False, "ode limit")
        prev = cur
        if t > 1e6:
            raise NumericalFailure("extinction ODE limit did not stabilize")


def oracle_rows(spec: ModelSpec, fs: Sequence[TestFunction], ts: Sequence[float], xs,
                quad: QuadratureSpec | None = None) -> list[dict]:
    """Tabulate mean, variance and h-semigroup oracles for export."""
    quad = quad or QuadratureSpec()
    rows = []
    pts, _ = _points(xs, spec.spatial.d)
    for f in fs:
        for t in ts:
            mean = np.atleast_1d(mean_semigroup(spec, t, f, pts, quad))
            var = np.atleast_1d(variance_oracle(spec, t, f, pts, quad))
            hs = np.atleast_1d(h_semigroup(spec, t, f, pts, quad))
            for p, mv, vv, hv in zip(pts, mean, var, hs):
                xlabel = " ".join(f"{v:.6g}" for v in p)
                for qname, val in (("mean", mv), ("variance", vv), ("h_semigroup", hv)):
                    rows.append(dict(model=spec.name, f=f.name, t=t, x=xlabel,
                                     quantity=qname, value=float(val)))
    return rows
