"""Closed-form principal eigendata for the registered OU models.

The registry is deliberately closed: there is no numerical eigensolver.
Gap values of the OU examples come from the classical OU spectrum (the
generator's eigenvalues are ``-c k``) and are tagged ``"derived"``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import math
from typing import Sequence

import numpy as np

from .fields import Field
from .model import BranchingMechanism, ModelSpec
from .quadrature import QuadratureSpec
from .spatial import MotionKind, SpatialMotion


class SpectralError(LookupError):
    """No registered eigendata for the requested model."""


@dataclass(frozen=True)
class SpectralData:
    """Principal eigendata of the mean semigroup.

    ``dual_weight = (K, r)`` encodes ``phi0_hat(x) m(dx) = K exp(-r|x|^2) dx``
    (``r = 0`` means Lebesgue measure), which every registered model admits.
    """

    lambda0: float
    gap: float
    phi0: Field
    phi0_hat: Field
    motion: SpatialMotion
    dual_weight: tuple[float, float]
    gap_provenance: str = "derived"
    lambda0_provenance: str = "published"
    label: str = ""

    def phi0_eval(self, x) -> np.ndarray:
        return self.phi0(np.atleast_2d(np.asarray(x, dtype=float)))

    @property
    def phi0_is_constant(self) -> bool:
        return self.phi0.is_constant

    def pairing(self, f, quad: QuadratureSpec | None = None) -> float:
        """``<f, phi0_hat>_m`` through the Gaussian (or Lebesgue) form of ``phi0_hat m``."""
        quad = quad or QuadratureSpec()
        K, r = self.dual_weight
        d = self.motion.d
        if r > 0:
            std = 1.0 / math.sqrt(2.0 * r)
            mass = K * (math.pi / r) ** (d / 2)
            return float(mass * f.expect_gaussian(np.zeros((1, d)), std, quad)[0])
        return float(K * f.lebesgue_integral(d, quad))


def registry_lookup(spec: ModelSpec) -> SpectralData:
    """Eigendata for OU models with constant ``alpha``.

    Inward OU: ``lambda0 = alpha`` with ``phi0 = phi0_hat = 1``.  Outward OU:
    ``lambda0 = alpha - c d`` with ``phi0 = phi0_hat = (c/pi)^{d/2} exp(-c|x|^2)``.
    """
    alpha = spec.alpha_constant
    if alpha is None:
        raise SpectralError(
            f"model {spec.name!r} has spatially varying alpha; only the h-transformed "
            "representation is registered")
    motion = spec.spatial
    c, d = motion.c, motion.d
    if motion.kind is MotionKind.INWARD:
        return SpectralData(
            lambda0=alpha, gap=c, phi0=Field.constant(1.0), phi0_hat=Field.constant(1.0),
            motion=motion, dual_weight=(motion.m_constant, c), label="inward-ou")
    phi = Field.gaussian((c / math.pi) ** (d / 2), c, dim=d)
    return SpectralData(
        lambda0=alpha - c * d, gap=c, phi0=phi, phi0_hat=phi, motion=motion,
        dual_weight=(1.0, 0.0), label="outward-ou")


@dataclass(frozen=True)
class HTransformData:
    """Ground-state transform of an inward OU with potential ``c1|x|^2 + c2``."""

    c: float
    c1: float
    c2: float
    d: int
    upsilon: float
    lambda_c: float
    h: Field
    h_inverse: Field
    alpha_orig: Field
    transformed_motion: SpatialMotion
    transformed_branching: BranchingMechanism = field(repr=False)

    @property
    def original_motion(self) -> SpatialMotion:
        return SpatialMotion(MotionKind.INWARD, self.c, self.d)

    def limit_density(self) -> Field:
        """Density (Lebesgue) of the limit shape of ``exp(-lambda_c t) X_t / W``."""
        return Field.gaussian((self.c / math.pi) ** (self.d / 2), self.c - self.upsilon, dim=self.d)


def htransform_build(c: float, c1: float, c2: float, d: int = 1,
                     alpha_orig: Field | None = None) -> HTransformData:
    """Ground-state (h-) transform data for the variable-rate inward OU model.

    The original model has ``a(x) = c1|x|^2 + c2``, unit branching rate and
    quadratic coefficient ``alpha_orig``.  The transformed model is an inward
    OU with drift ``c - 2 upsilon``, linear coefficient ``lambda_c`` and
    quadratic coefficient ``h alpha_orig``.
    """
    if c1 <= 0 or c2 <= 0:
        raise ValueError("c1 and c2 must be positive")
    if not c > math.sqrt(2 * c1):
        raise ValueError(f"need c > sqrt(2 c1) = {math.sqrt(2 * c1):g}, got c = {c:g}")
    upsilon = 0.5 * (c - math.sqrt(c * c - 2 * c1))
    lambda_c = c2 + d * upsilon
    kappa = ((c - 2 * upsilon) / c) ** (d / 2)
    h = Field.gaussian(kappa, -upsilon, dim=d)
    h_inv = Field.gaussian(1.0 / kappa, upsilon, dim=d)
    if alpha_orig is None:
        # bounded below after the transform so the particle scheme stays admissible
        alpha_orig = Field.gaussian(1.0, upsilon, dim=d) * (Field.constant(1.0) + Field.gaussian(0.5, 1.0, dim=d))
    b_h = h * alpha_orig
    if not b_h.is_bounded:
        raise ValueError("h * alpha_orig must be bounded")
    motion = SpatialMotion(MotionKind.INWARD, c - 2 * upsilon, d)
    mech = BranchingMechanism(a=Field.constant(lambda_c), b=b_h, beta=Field.constant(1.0))
    return HTransformData(c, c1, c2, d, upsilon, lambda_c, h, h_inv, alpha_orig, motion, mech)


@dataclass(frozen=True)
class BernsteinFunction:
    """``phi(lam) = drift lam + sum_i kappa_i (1 - exp(-lam tau_i))``.

    The closed form is entire, so evaluation at negative arguments is the
    analytic continuation.
    """

    drift: float = 0.0
    jumps: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        if self.drift < 0 or any(k < 0 or t <= 0 for k, t in self.jumps):
            raise ValueError("Bernstein data must have drift >= 0, kappa >= 0, tau > 0")

    def __call__(self, lam: float) -> float:
        return self.drift * lam + sum(k * -math.expm1(-lam * t) for k, t in self.jumps)


def subordinated_lambda0(alpha_rate: float, laplace_exponent: BernsteinFunction,
                         lambda0_tilde: float) -> float:
    """Principal eigenvalue after subordination: ``alpha - phi(-lambda0_tilde)``.

    ``lambda0_tilde <= 0`` is the principal eigenvalue of the base motion.
    """
    if lambda0_tilde > 0:
        raise ValueError("base principal eigenvalue must be <= 0")
    value = alpha_rate - laplace_exponent(-lambda0_tilde)
    if not value > 0:
        raise ValueError(f"not supercritical: alpha - phi(-lambda0_tilde) = {value:g}")
    return value


def registry_table(presets: Sequence[ModelSpec] | None = None) -> list[dict]:
    """One row of eigendata per registered preset (default parameters)."""
    from .presets import default_registry_models

    rows = []
    for spec in presets or default_registry_models():
        sd = registry_lookup(spec)
        m = spec.spatial
        br = spec.branching
        formula = "lambda0 = beta*a" if m.kind is MotionKind.INWARD else "lambda0 = beta*a - c*d"
        if spec.htransform is not None:
            formula = "lambda0 = lambda_c = c2 + d*upsilon"
        rows.append(dict(
            model=spec.name, motion=m.kind.value, c=m.c, d=m.d,
            beta=br.beta.constant_value() if br.beta.is_constant else float("nan"),
            a=br.a.constant_value() if br.a.is_constant else float("nan"),
            lambda0=sd.lambda0, formula=formula, gap=sd.gap,
            gap_provenance=sd.gap_provenance, lambda0_provenance=sd.lambda0_provenance,
            phi0=repr(sd.phi0), phi0_hat=repr(sd.phi0_hat)))
    return rows


__all__ = ["BernsteinFunction", "HTransformData", "SpectralData", "SpectralError",
           "htransform_build", "registry_lookup", "registry_table", "subordinated_lambda0"]
