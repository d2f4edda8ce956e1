"""Observables ``f`` for ``<f, X_t>``: a small closed family with metadata.

Members are smooth fields (Gaussian x polynomial), ball indicators, finite
linear combinations, and tabulated interpolants (used for resolvent-type
observables).  Each member knows how to take Gaussian expectations
``E f(mean + std Z)`` so that transition-semigroup oracles can be exact for
indicators instead of relying on quadrature of a discontinuous integrand.
"""

from __future__ import annotations

import math
from typing import Callable, Sequence

import numpy as np
from scipy import stats
from scipy.interpolate import CubicSpline
from scipy.special import gammaln

from .fields import Field
from .quadrature import QuadratureSpec, expect_normal, gaussian_integral


class TestFunction:
    """Base class.  Subclasses implement ``__call__`` on ``(n, d)`` arrays.

    Attributes
    ----------
    name : str
        Label used in reports and CSV output.
    c0 : bool
        Continuous and vanishing at infinity.
    discontinuity_null : bool
        The discontinuity set has zero Lebesgue (hence zero ``m``) measure.
    sup_bound : float or None
        Known bound on ``sup |f|``.
    decay : float
        Gaussian decay rate ``q`` with ``|f| <~ exp(-q|x|^2)``; ``inf`` for
        compact support and 0 when the function does not decay.
    phi0_bound : float or None
        Declared ``c`` with ``|f| <= c phi0``.
    """

    __test__ = False  # keep pytest from collecting this class

    name: str = "f"
    c0: bool = False
    discontinuity_null: bool = True
    sup_bound: float | None = None
    decay: float = 0.0
    phi0_bound: float | None = None

    def __call__(self, x) -> np.ndarray:
        raise NotImplementedError

    def expect_gaussian(self, mean, std: float, quad: QuadratureSpec) -> np.ndarray:
        """``E f(mean + std Z)`` per row of ``mean``; ``std = 0`` evaluates ``f``."""
        mean = np.atleast_2d(np.asarray(mean, dtype=float))
        if std == 0.0:
            return self(mean)
        return expect_normal(self, mean, std, quad)

    def lebesgue_integral(self, d: int, quad: QuadratureSpec) -> float:
        """``int f dx`` over R^d."""
        if not self.decay > 0:
            raise ValueError(f"{self.name} is not Lebesgue integrable (no Gaussian decay)")
        q = self.decay
        return gaussian_integral(lambda y: self(y) * np.exp(q * np.sum(y * y, axis=1)), d, q, quad)

    def constant_value(self) -> float | None:
        """The value of ``f`` if it is constant, else ``None``."""
        return None

    # algebra ------------------------------------------------------------
    def __add__(self, other: "TestFunction") -> "TestFunction":
        return Combination([(1.0, self), (1.0, other)])

    def __sub__(self, other: "TestFunction") -> "TestFunction":
        return Combination([(1.0, self), (-1.0, other)])

    def __rmul__(self, scalar: float) -> "TestFunction":
        return Combination([(float(scalar), self)])

    def __neg__(self) -> "TestFunction":
        return Combination([(-1.0, self)])

    def with_name(self, name: str) -> "TestFunction":
        self.name = name
        return self

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.name!r})"


class Smooth(TestFunction):
    """A member of the closed field family."""

    def __init__(self, field: Field, name: str | None = None, sup_bound: float | None = None,
                 phi0_bound: float | None = None):
        self.field = field
        self.name = name or repr(field)
        self.decay = field.gauss_decay if field.terms else math.inf
        self.c0 = self.decay > 0
        self.sup_bound = sup_bound if sup_bound is not None else _field_sup(field)
        self.phi0_bound = phi0_bound

    def __call__(self, x) -> np.ndarray:
        return self.field(np.atleast_2d(np.asarray(x, dtype=float)))

    def constant_value(self) -> float | None:
        return self.field.constant_value() if self.field.is_constant else None

    def expect_gaussian(self, mean, std: float, quad: QuadratureSpec) -> np.ndarray:
        # exact; quadrature would under-resolve narrow Gaussians under wide laws
        return self.field.expect_normal(mean, std)

    def lebesgue_integral(self, d: int, quad: QuadratureSpec) -> float:
        if not self.decay > 0:
            raise ValueError(f"{self.name} is not Lebesgue integrable (no Gaussian decay)")
        return self.field.lebesgue_integral(d)

    def times(self, other: Field, name: str | None = None, phi0_bound: float | None = None) -> "Smooth":
        return Smooth(self.field * other, name or f"{self.name}*g", phi0_bound=phi0_bound)


def _field_sup(field: Field) -> float | None:
    if not field.terms:
        return 0.0
    if all(not any(t.powers) for t in field.terms):
        return float(sum(abs(t.coef) for t in field.terms))
    return None


class Ball(TestFunction):
    """Indicator of the closed ball ``{|x - center| <= r}``."""

    def __init__(self, center: Sequence[float], r: float, name: str | None = None):
        if not r > 0:
            raise ValueError("ball radius must be positive")
        self.center = np.asarray(center, dtype=float).reshape(-1)
        self.r = float(r)
        self.name = name or f"ball(r={r:g})"
        self.c0 = False
        self.discontinuity_null = True  # spheres are Lebesgue-null
        self.sup_bound = 1.0
        self.decay = math.inf

    def __call__(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return (np.sum((x - self.center) ** 2, axis=1) <= self.r ** 2).astype(float)

    def expect_gaussian(self, mean, std: float, quad: QuadratureSpec) -> np.ndarray:
        mean = np.atleast_2d(np.asarray(mean, dtype=float))
        if std == 0.0:
            return self(mean)
        d = mean.shape[1]
        nc = np.sum((mean - self.center) ** 2, axis=1) / std ** 2
        return stats.ncx2.cdf(self.r ** 2 / std ** 2, d, nc)

    def lebesgue_integral(self, d: int, quad: QuadratureSpec) -> float:
        return math.exp((d / 2) * math.log(math.pi) - gammaln(d / 2 + 1)) * self.r ** d


class Combination(TestFunction):
    """Finite linear combination ``sum_i c_i f_i``."""

    def __init__(self, parts: Sequence[tuple[float, TestFunction]], name: str | None = None):
        flat: list[tuple[float, TestFunction]] = []
        for c, f in parts:
            if isinstance(f, Combination):
                flat.extend((c * ci, fi) for ci, fi in f.parts)
            else:
                flat.append((float(c), f))
        self.parts = tuple(flat)
        self.name = name or " + ".join(f"{c:g}*{f.name}" for c, f in self.parts)
        self.c0 = all(f.c0 for _, f in self.parts)
        self.discontinuity_null = all(f.discontinuity_null for _, f in self.parts)
        sups = [f.sup_bound for _, f in self.parts]
        self.sup_bound = None if any(s is None for s in sups) else \
            float(sum(abs(c) * s for (c, _), s in zip(self.parts, sups)))
        self.decay = min((f.decay for _, f in self.parts), default=math.inf)
        bounds = [f.phi0_bound for _, f in self.parts]
        self.phi0_bound = None if any(b is None for b in bounds) else \
            float(sum(abs(c) * b for (c, _), b in zip(self.parts, bounds)))

    def __call__(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return sum(c * f(x) for c, f in self.parts)

    def expect_gaussian(self, mean, std, quad):
        return sum(c * f.expect_gaussian(mean, std, quad) for c, f in self.parts)

    def lebesgue_integral(self, d, quad):
        return float(sum(c * f.lebesgue_integral(d, quad) for c, f in self.parts))

    def constant_value(self) -> float | None:
        vals = [f.constant_value() for _, f in self.parts]
        if any(v is None for v in vals):
            return None
        return float(sum(c * v for (c, _), v in zip(self.parts, vals)))


class Tabulated(TestFunction):
    """Cubic-spline interpolant of a 1-d function with an exact fallback.

    Points outside the tabulated interval are evaluated with ``exact``.
    """

    def __init__(self, exact: Callable[[np.ndarray], np.ndarray], lo: float, hi: float,
                 tol: float = 1e-6, n0: int = 65, max_points: int = 1 << 16,
                 name: str = "tabulated", **meta):
        self.exact = exact
        self.lo, self.hi = float(lo), float(hi)
        self.name = name
        for k, v in meta.items():
            setattr(self, k, v)
        n = n0
        while True:
            grid = np.linspace(self.lo, self.hi, n)
            vals = np.asarray(exact(grid[:, None]), dtype=float)
            spline = CubicSpline(grid, vals)
            mids = 0.5 * (grid[1:] + grid[:-1])
            err = float(np.max(np.abs(spline(mids) - exact(mids[:, None]))))
            if err <= tol or n >= max_points:
                break
            n = 2 * n - 1
        self.spline = spline
        self.n_points = n
        self.interp_error = err
        if err > tol:
            raise ValueError(f"interpolation error {err:.2e} above budget {tol:.1e}")

    def __call__(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[1] != 1:
            raise ValueError("tabulated observables are one-dimensional")
        z = x[:, 0]
        out = np.empty(z.shape)
        inside = (z >= self.lo) & (z <= self.hi)
        out[inside] = self.spline(z[inside])
        if not np.all(inside):
            out[~inside] = self.exact(x[~inside])
        return out


# convenience constructors ------------------------------------------------

def constant(value: float = 1.0, name: str | None = None) -> Smooth:
    return Smooth(Field.constant(value), name or f"const({value:g})", sup_bound=abs(value))


def gaussian(p: float, q: float, center: Sequence[float] | None = None, d: int = 1,
             name: str | None = None) -> Smooth:
    center = tuple(center) if center is not None else (0.0,) * d
    return Smooth(Field.gaussian(p, q, center), name or f"gauss(p={p:g},q={q:g})", sup_bound=abs(p))


def coordinate(k: int = 0, d: int = 1, name: str | None = None) -> Smooth:
    return Smooth(Field.coordinate(k, d), name or f"x{k + 1}")


def ball(center: Sequence[float], r: float, name: str | None = None) -> Ball:
    return Ball(center, r, name)


class FieldScaled(TestFunction):
    """Pointwise product ``f(x) g(x)`` of an observable with a field."""

    def __init__(self, f: TestFunction, g: Field, name: str | None = None,
                 phi0_bound: float | None = None):
        self.f, self.g = f, g
        self.name = name or f"{f.name}*{g!r}"
        self.c0 = f.c0 and g.is_bounded
        self.discontinuity_null = f.discontinuity_null
        self.decay = f.decay + g.gauss_decay if g.terms else math.inf
        self.phi0_bound = phi0_bound

    def __call__(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return self.f(x) * self.g(x)


def scaled(f: TestFunction, g: Field, name: str | None = None,
           phi0_bound: float | None = None) -> TestFunction:
    """``f * g``, staying inside the smooth family when possible."""
    if isinstance(f, Smooth):
        return Smooth(f.field * g, name or f"{f.name}*g", phi0_bound=phi0_bound)
    if g.is_constant:
        return Combination([(g.constant_value(), f)], name=name or f.name)
    return FieldScaled(f, g, name, phi0_bound)


class Pointwise(TestFunction):
    """An arbitrary vectorized callable with declared metadata.

    Used to pair oracle outputs (for instance ``U_q g`` evaluated at
    quadrature nodes) without an intermediate interpolant.
    """

    def __init__(self, fn: Callable[[np.ndarray], np.ndarray], name: str = "pointwise",
                 decay: float = 0.0, sup_bound: float | None = None, c0: bool = False):
        self.fn = fn
        self.name = name
        self.decay = decay
        self.sup_bound = sup_bound
        self.c0 = c0

    def __call__(self, x) -> np.ndarray:
        return np.asarray(self.fn(np.atleast_2d(np.asarray(x, dtype=float))), dtype=float)


def square(f: TestFunction) -> TestFunction:
    """``f^2``, exact for smooth members and indicators."""
    if isinstance(f, Smooth):
        return Smooth(f.field * f.field, f"({f.name})^2")
    if isinstance(f, Ball):
        return f
    return Pointwise(lambda x: f(x) ** 2, f"({f.name})^2", decay=2 * f.decay,
                     sup_bound=None if f.sup_bound is None else f.sup_bound ** 2, c0=f.c0)
