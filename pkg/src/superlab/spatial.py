"""Ornstein-Uhlenbeck spatial motions with exact Gaussian transitions.

Two motions are supported, both with unit diffusion coefficient:

* inward OU, generator ``0.5 Laplacian - c x . grad``; reference measure
  ``m`` is its stationary law ``N(0, I/(2c))``;
* outward OU, generator ``0.5 Laplacian + c x . grad``; reference measure
  ``m(dx) = (c/pi)^{-d/2} exp(c|x|^2) dx`` (sigma-finite).

Both are ``m``-symmetric, and transition densities are taken with respect
to ``m``.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
import math

import numpy as np

from .checks import ValidationReport
from .quadrature import QuadratureError, QuadratureSpec, gaussian_integral


class MotionKind(str, Enum):
    INWARD = "inward"
    OUTWARD = "outward"


@dataclass(frozen=True)
class SpatialMotion:
    kind: MotionKind
    c: float
    d: int = 1

    def __post_init__(self):
        object.__setattr__(self, "kind", MotionKind(self.kind))
        if not self.c > 0:
            raise ValueError("drift coefficient c must be positive")
        if int(self.d) != self.d or self.d < 1:
            raise ValueError("dimension must be a positive integer")
        object.__setattr__(self, "d", int(self.d))

    @property
    def sign(self) -> int:
        """+1 for outward (m grows like exp(c|x|^2)), -1 for inward."""
        return 1 if self.kind is MotionKind.OUTWARD else -1

    def moments(self, t: float) -> tuple[float, float]:
        """``(F, V)`` such that ``xi_t = F x + sqrt(V) Z`` under ``Pi_x``."""
        _check_time(t)
        c = self.c
        if self.kind is MotionKind.INWARD:
            return math.exp(-c * t), -math.expm1(-2 * c * t) / (2 * c)
        return math.exp(c * t), math.expm1(2 * c * t) / (2 * c)

    # reference measure --------------------------------------------------
    @property
    def m_constant(self) -> float:
        c, d = self.c, self.d
        return (c / math.pi) ** (d / 2) if self.kind is MotionKind.INWARD else (math.pi / c) ** (d / 2)

    def m_density(self, x) -> np.ndarray:
        """Lebesgue density of ``m``."""
        x = np.asarray(x, dtype=float)
        return self.m_constant * np.exp(self.sign * self.c * np.sum(x * x, axis=-1))

    def integrate_m(self, g, quad: QuadratureSpec, decay: float | None = None,
                    center=None, lebesgue: bool = False) -> float:
        """``int g dm``.

        ``decay`` declares a Gaussian rate ``q`` with ``|g(x)| <~ exp(-q|x|^2)``
        (up to polynomial factors).  Against the outward measure the
        declaration is mandatory and must exceed ``c``.  With
        ``lebesgue=True`` the callable already returns ``g`` times the
        density of ``m``, which avoids overflow far from the origin.
        """
        rate = self.c * (-self.sign) + (decay or 0.0)
        if self.kind is MotionKind.OUTWARD and (decay is None or rate <= 0):
            raise QuadratureError(
                "integrals against the outward-OU measure need a declared dominating "
                f"Gaussian with rate > c={self.c}")
        if rate <= 0:
            raise QuadratureError("integrand is not dominated by a Gaussian")
        d = self.d
        center = np.zeros(d) if center is None else np.asarray(center, dtype=float)

        def h(y):
            log_w = -rate * np.sum((y - center) ** 2, axis=1)
            vals = np.asarray(g(y), dtype=float)
            if lebesgue:
                return vals * np.exp(-log_w)
            log_m = self.sign * self.c * np.sum(y * y, axis=1)
            with np.errstate(over="ignore", invalid="ignore"):
                out = vals * (self.m_constant * np.exp(log_m - log_w))
            return np.where(vals == 0.0, 0.0, out)

        value = gaussian_integral(h, d, rate, quad, center)
        if not np.isfinite(value):
            raise QuadratureError("integral overflowed; pass a Lebesgue-form integrand")
        return value

    def __str__(self) -> str:
        return f"{self.kind.value}-ou(c={self.c:g}, d={self.d})"


def _check_time(t: float) -> None:
    if not t > 0:
        raise ValueError(f"time must be positive, got {t}")


def sample_transition(motion: SpatialMotion, x, t: float, rng: np.random.Generator) -> np.ndarray:
    """Exact draw of ``xi_t`` given ``xi_0 = x``; ``x`` may be a single point or ``(n, d)``."""
    F, V = motion.moments(t)
    x = np.asarray(x, dtype=float)
    return F * x + math.sqrt(V) * rng.standard_normal(x.shape)


def transition_density(motion: SpatialMotion, t: float, x, y) -> np.ndarray:
    """Density of ``xi_t`` at ``y`` given ``xi_0 = x``, with respect to ``m``.

    ``x`` and ``y`` broadcast against each other along leading axes; the last
    axis is the spatial coordinate.
    """
    F, V = motion.moments(t)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    d = motion.d
    r2 = np.sum((y - F * x) ** 2, axis=-1)
    log_leb = -0.5 * d * math.log(2 * math.pi * V) - r2 / (2 * V)
    log_m = math.log(motion.m_constant) + motion.sign * motion.c * np.sum(y * y, axis=-1)
    return np.exp(log_leb - log_m)


def transition_density_lebesgue(motion: SpatialMotion, t: float, x, y) -> np.ndarray:
    """Lebesgue density of ``xi_t`` at ``y`` given ``xi_0 = x``."""
    F, V = motion.moments(t)
    r2 = np.sum((np.asarray(y, dtype=float) - F * np.asarray(x, dtype=float)) ** 2, axis=-1)
    return np.exp(-0.5 * motion.d * math.log(2 * math.pi * V) - r2 / (2 * V))


def transition_decay(motion: SpatialMotion, t: float) -> float:
    """Gaussian rate of ``y -> p(t, x, y)`` as a Lebesgue function (times m-density)."""
    F, V = motion.moments(t)
    return 1.0 / (2 * V) + motion.sign * motion.c


def a_t_gaussian_form(motion: SpatialMotion, t: float) -> tuple[float, float]:
    """``(A, r)`` with ``a_t(x) = A exp(r |x|^2)``."""
    F, V = motion.moments(2 * t)
    d = motion.d
    pref = (2 * math.pi * V) ** (-d / 2) / motion.m_constant
    rate = -((1 - F) ** 2) / (2 * V) - motion.sign * motion.c
    return pref, rate


def a_t_diag(motion: SpatialMotion, t: float, x) -> np.ndarray:
    """``a_t(x) = int p(t, x, y)^2 m(dy) = p(2t, x, x)`` (symmetric kernels)."""
    _check_time(t)
    x = np.asarray(x, dtype=float)
    return transition_density(motion, 2 * t, x, x)


# Both implemented motions are m-symmetric, so the dual quantity coincides.
a_hat_t_diag = a_t_diag


def a_t_power_integral(motion: SpatialMotion, t: float, k: int) -> float:
    """Closed form of ``int a_t^k dm`` (``inf`` when divergent)."""
    pref, rate = a_t_gaussian_form(motion, t)
    expo = k * rate + motion.sign * motion.c
    if expo >= 0:
        return math.inf
    return pref ** k * motion.m_constant * (math.pi / -expo) ** (motion.d / 2)


def validate_assumption1(motion: SpatialMotion, t_grid, quad: QuadratureSpec | None = None,
                         x_samples=None, tol: float = 1e-9) -> ValidationReport:
    """Numerical diagnostics for the integrability assumptions on ``p``.

    (a) ``int p(t, y, x) m(dy) <= 1`` at sampled ``x``;
    (b) ``a_t`` finite, continuous on a grid, and in ``L^1(m)`` for every ``t``;
    (c) ``a_t`` in ``L^2(m)`` for at least one ``t`` of the grid.
    """
    quad = quad or QuadratureSpec()
    report = ValidationReport()
    t_grid = list(t_grid)
    if not t_grid:
        report.complete = False
        return report
    d = motion.d
    if x_samples is None:
        x_samples = np.linspace(-2.0, 2.0, 5)[:, None] * np.ones((1, d))
    x_samples = np.atleast_2d(np.asarray(x_samples, dtype=float))

    for t in t_grid:
        decay = transition_decay(motion, t)
        masses = []
        F, _ = motion.moments(t)
        for x in x_samples:
            # p is symmetric, so integrate y -> p(t, x, y); its m-weighted peak sits at F x
            masses.append(motion.integrate_m(lambda y, x=x: transition_density_lebesgue(motion, t, x, y),
                                             quad, decay=decay, center=F * x, lebesgue=True))
        worst = max(masses)
        report.add(f"(a) mass bound t={t:g}", worst <= 1 + tol, worst,
                   f"max over samples of int p(t,y,x) m(dy) = {worst:.12g}")

    for t in t_grid:
        grid = np.linspace(-4.0, 4.0, 161)[:, None] * np.ones((1, d))
        vals = a_t_diag(motion, t, grid)
        fine = a_t_diag(motion, t, 0.5 * (grid[1:] + grid[:-1]))
        jump = float(np.max(np.abs(fine - 0.5 * (vals[1:] + vals[:-1]))))
        scale = float(np.max(np.abs(vals)))
        finite = bool(np.all(np.isfinite(vals)))
        l1 = a_t_power_integral(motion, t, 1)
        pref, rate = a_t_gaussian_form(motion, t)
        if -rate - motion.sign * motion.c > 0:
            l1_quad = motion.integrate_m(lambda y: a_t_diag(motion, t, y), quad, decay=-rate)
        else:
            l1_quad = math.inf
        ok = finite and math.isfinite(l1) and jump <= 1e-2 * scale
        report.add(f"(b) a_t continuous and L1 t={t:g}", ok, l1,
                   f"int a_t dm = {l1:.10g} (quadrature {l1_quad:.10g}); midpoint defect {jump:.2e}")

    l2 = {t: a_t_power_integral(motion, t, 2) for t in t_grid}
    good = [t for t, v in l2.items() if math.isfinite(v)]
    detail = ", ".join(f"t={t:g}: {v:.6g}" for t, v in l2.items())
    if good:
        t0 = good[0]
        _, rate = a_t_gaussian_form(motion, t0)
        q2 = motion.integrate_m(lambda y: a_t_diag(motion, t0, y) ** 2, quad, decay=-2 * rate)
        detail += f"; quadrature at t={t0:g}: {q2:.10g}"
    report.add("(c) a_t in L2 for some t", bool(good), l2, detail)
    return report
