"""Branching mechanisms, initial measures and full model specifications.

The branching mechanism is

    psi(x, lam) = -a(x) lam + b(x) lam^2 + sum_i w_i(x) (exp(-lam y_i) - 1 + lam y_i)

with a finite-atom jump kernel ``n(x, dy) = sum_i w_i(x) delta_{y_i}(dy)``
and branching rate ``beta(x)``.  Derived rates: ``alpha = beta a`` and
``A = beta (2 b + sum_i w_i y_i^2)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import math
from typing import Sequence

import numpy as np

from .checks import ValidationReport
from .fields import Field, _as_field
from .spatial import SpatialMotion


class ConfigurationError(ValueError):
    """Invalid or incomplete model/simulation configuration."""


@dataclass(frozen=True)
class Atom:
    weight: Field
    size: float

    def __post_init__(self):
        object.__setattr__(self, "weight", _as_field(self.weight))
        if not self.size > 0:
            raise ValueError("jump sizes must be positive")


@dataclass(frozen=True)
class Bounds:
    """Declared sup-norm bounds of the coefficient fields."""

    a: float
    b: float
    beta: float
    w: tuple[float, ...] = ()


def _auto_sup(f: Field) -> float | None:
    # exact for constants, an upper bound for sums of Gaussians
    if all(not any(t.powers) for t in f.terms):
        return float(sum(abs(t.coef) for t in f.terms))
    return None


@dataclass(frozen=True)
class BranchingMechanism:
    a: Field
    b: Field
    beta: Field = field(default_factory=lambda: Field.constant(1.0))
    atoms: tuple[Atom, ...] = ()
    bounds: Bounds | None = None

    def __post_init__(self):
        object.__setattr__(self, "a", _as_field(self.a))
        object.__setattr__(self, "b", _as_field(self.b))
        object.__setattr__(self, "beta", _as_field(self.beta))
        atoms = tuple(a if isinstance(a, Atom) else Atom(*a) for a in self.atoms)
        object.__setattr__(self, "atoms", atoms)
        if self.bounds is None:
            sups = [_auto_sup(f) for f in (self.a, self.b, self.beta)]
            wsups = [_auto_sup(at.weight) for at in atoms]
            if all(s is not None for s in sups + wsups):
                object.__setattr__(self, "bounds", Bounds(*sups, tuple(wsups)))
        elif len(self.bounds.w) != len(atoms):
            raise ConfigurationError("one declared weight bound per atom is required")

    @property
    def is_homogeneous(self) -> bool:
        return all(f.is_constant for f in (self.a, self.b, self.beta)) and \
            all(at.weight.is_constant for at in self.atoms)

    def constants(self) -> dict:
        """Coefficient values of a spatially homogeneous mechanism."""
        if not self.is_homogeneous:
            raise ConfigurationError("branching mechanism is not spatially homogeneous")
        return dict(a=self.a.constant_value(), b=self.b.constant_value(),
                    beta=self.beta.constant_value(),
                    atoms=[(at.weight.constant_value(), at.size) for at in self.atoms])


def _pts(x) -> np.ndarray:
    return np.atleast_2d(np.asarray(x, dtype=float))


def psi_eval(mech: BranchingMechanism, x, lam) -> np.ndarray | float:
    """Branching mechanism ``psi(x, lam)`` for ``lam >= 0``.

    ``x`` is one point (returns a scalar for scalar ``lam``) or ``(n, d)``.
    """
    lam = np.asarray(lam, dtype=float)
    if np.any(lam < 0):
        raise ValueError("psi is defined for lambda >= 0")
    scalar = np.ndim(x) <= 1 and lam.ndim == 0
    pts = _pts(x)
    a = mech.a(pts)
    b = mech.b(pts)
    out = -a * lam + b * lam ** 2
    for at in mech.atoms:
        ly = lam * at.size
        # expm1 keeps the compensated jump term accurate for small lam
        out = out + at.weight(pts) * (np.expm1(-ly) + ly)
    return float(out[0]) if scalar else out


def alpha_of(mech: BranchingMechanism, x) -> np.ndarray | float:
    """``alpha(x) = beta(x) a(x)``."""
    pts = _pts(x)
    out = mech.beta(pts) * mech.a(pts)
    return float(out[0]) if np.ndim(x) <= 1 else out


def big_a_of(mech: BranchingMechanism, x) -> np.ndarray | float:
    """``A(x) = beta(x) (2 b(x) + sum_i w_i(x) y_i^2)``."""
    pts = _pts(x)
    inner = 2.0 * mech.b(pts)
    for at in mech.atoms:
        inner = inner + at.weight(pts) * at.size ** 2
    out = mech.beta(pts) * inner
    return float(out[0]) if np.ndim(x) <= 1 else out


def alpha_field(mech: BranchingMechanism) -> Field:
    return mech.beta * mech.a


def big_a_field(mech: BranchingMechanism) -> Field:
    inner = 2.0 * mech.b
    for at in mech.atoms:
        inner = inner + at.weight * at.size ** 2
    return mech.beta * inner


def k_bound(mech: BranchingMechanism) -> float:
    """Upper bound ``K >= sup_x (|alpha(x)| + A(x))`` from the declared bounds."""
    bd = mech.bounds
    if bd is None:
        raise ConfigurationError("k_bound needs declared sup bounds for a, b, beta and the atom weights")
    second = sum(w * at.size ** 2 for w, at in zip(bd.w, mech.atoms))
    return bd.beta * abs(bd.a) + bd.beta * (2 * bd.b + second)


def max_admissible_epsilon(mech: BranchingMechanism, x_samples=None) -> float:
    """Largest particle mass keeping the binary offspring probability in [0, 1].

    Needs ``eps |a(x)| / (4 b(x)) <= 1/2`` everywhere, i.e.
    ``eps <= inf_x 2 b(x) / |a(x)|``.  Exact for homogeneous mechanisms,
    estimated on ``x_samples`` otherwise.
    """
    if mech.is_homogeneous:
        k = mech.constants()
        if k["a"] == 0:
            return math.inf
        return 2 * k["b"] / abs(k["a"]) if k["b"] > 0 else 0.0
    if x_samples is None:
        raise ConfigurationError("sample points are needed for a spatially varying mechanism")
    a = np.abs(mech.a(x_samples))
    b = mech.b(x_samples)
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(a > 0, 2 * b / a, np.inf)
    return float(np.min(r))


@dataclass(frozen=True)
class InitialMeasure:
    """Finite atomic measure ``sum_j m_j delta_{x_j}``."""

    atoms: tuple[tuple[tuple[float, ...], float], ...]

    def __post_init__(self):
        atoms = tuple((tuple(float(v) for v in np.atleast_1d(pos)), float(mass)) for pos, mass in self.atoms)
        if not atoms:
            raise ValueError("initial measure needs at least one atom")
        if any(not mass > 0 for _, mass in atoms):
            raise ValueError("atom masses must be positive")
        if len({len(pos) for pos, _ in atoms}) != 1:
            raise ValueError("atoms must share one dimension")
        object.__setattr__(self, "atoms", atoms)

    @classmethod
    def dirac(cls, x: Sequence[float] | float = 0.0, mass: float = 1.0) -> "InitialMeasure":
        return cls(((tuple(np.atleast_1d(x)), mass),))

    @property
    def dim(self) -> int:
        return len(self.atoms[0][0])

    @property
    def total_mass(self) -> float:
        return float(sum(m for _, m in self.atoms))

    def positions(self) -> np.ndarray:
        return np.array([p for p, _ in self.atoms], dtype=float)

    def masses(self) -> np.ndarray:
        return np.array([m for _, m in self.atoms], dtype=float)


@dataclass(frozen=True)
class ModelSpec:
    spatial: SpatialMotion
    branching: BranchingMechanism
    initial: InitialMeasure = field(default_factory=InitialMeasure.dirac)
    name: str = "custom"
    # set by the h-transform preset: maps observables of the original process
    htransform: object | None = None

    def __post_init__(self):
        if self.initial.dim != self.spatial.d:
            raise ConfigurationError(
                f"initial atoms live in dimension {self.initial.dim}, motion in {self.spatial.d}")

    @property
    def alpha_constant(self) -> float | None:
        f = alpha_field(self.branching)
        return f.constant_value() if f.is_constant else None

    def key(self) -> str:
        """Stable description used for metadata hashes."""
        br = self.branching
        atoms = [(repr(at.weight), at.size) for at in br.atoms]
        return (f"{self.name}|{self.spatial}|a={br.a!r}|b={br.b!r}|beta={br.beta!r}|atoms={atoms}"
                f"|mu={self.initial.atoms}")


def validate_model(spec: ModelSpec, n_samples: int = 2000, seed: int = 0,
                   sample_scale: float = 4.0) -> ValidationReport:
    """Check the standing assumptions needed before simulation.

    Failures are report entries, never exceptions.
    """
    report = ValidationReport()
    mech = spec.branching
    d = spec.spatial.d
    rng = np.random.default_rng(seed)
    xs = np.concatenate([np.zeros((1, d)), sample_scale * rng.standard_normal((n_samples, d))])

    neg = {"b": mech.b(xs).min(), "beta": mech.beta(xs).min()}
    for i, at in enumerate(mech.atoms):
        neg[f"w{i + 1}"] = at.weight(xs).min()
    bad = {k: float(v) for k, v in neg.items() if v < 0}
    report.add("nonnegativity of b, w, beta", not bad, neg,
               "ok" if not bad else f"negative values: {bad}")

    bd = mech.bounds
    if bd is None:
        report.add("declared bounds", False, None, "missing declared sup bounds")
        report.add("second-moment condition", False, None, "needs declared weight bounds")
    else:
        viol = []
        for name, f, bound in (("a", mech.a, bd.a), ("b", mech.b, bd.b), ("beta", mech.beta, bd.beta)):
            if np.max(np.abs(f(xs))) > bound * (1 + 1e-12):
                viol.append(name)
        for i, (at, wb) in enumerate(zip(mech.atoms, bd.w)):
            if np.max(np.abs(at.weight(xs))) > wb * (1 + 1e-12):
                viol.append(f"w{i + 1}")
        report.add("declared bounds respected", not viol, bd,
                   "ok" if not viol else f"sampled values exceed bounds for {viol}")
        second = sum(w * at.size ** 2 for w, at in zip(bd.w, mech.atoms))
        report.add("second-moment condition", math.isfinite(second), second,
                   f"sup sum_i w_i y_i^2 <= {second:g}")

    a_vals = mech.a(xs)
    b_vals = mech.b(xs)
    carrier = bool(np.all((a_vals == 0) | (b_vals > 0)))
    report.add("binary channel carries the drift (b > 0 where a != 0)", carrier)

    report.add("initial measure finite", math.isfinite(spec.initial.total_mass) and spec.initial.total_mass > 0,
               spec.initial.total_mass)

    from .spectral import SpectralError, registry_lookup
    try:
        sd = registry_lookup(spec)
        report.add("supercritical (lambda0 > 0)", sd.lambda0 > 0, sd.lambda0, f"lambda0 = {sd.lambda0:g}")
    except SpectralError as exc:
        report.add("supercritical (lambda0 > 0)", False, None, str(exc))
    return report
