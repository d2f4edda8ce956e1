"""Closed family of scalar fields on R^d.

Every coefficient of a branching mechanism (and every smooth test
function) is a finite sum of terms

    coef * exp(-q |x - x0|^2) * prod_k x_k^{p_k}

where ``q >= 0`` for the bounded members (negative ``q`` is allowed for
growing weights such as ground states; see ``is_bounded``).  The family
contains constants, Gaussians and polynomials and is closed under sums and
products, which keeps every oracle integral a Gauss-Hermite-friendly
integrand.  Fields can also be packed into flat
arrays so that compiled particle kernels can evaluate them.
"""

from __future__ import annotations

from dataclasses import dataclass
import math
from typing import Iterable, Sequence

import numpy as np


@dataclass(frozen=True)
class Term:
    coef: float
    q: float = 0.0
    center: tuple[float, ...] = ()
    powers: tuple[int, ...] = ()

    def padded(self, d: int) -> "Term":
        center = self.center or (0.0,) * d
        powers = self.powers or (0,) * d
        if len(center) != d or len(powers) != d:
            raise ValueError(f"term of dimension {len(center) or len(powers)} used in dimension {d}")
        return Term(self.coef, self.q, tuple(center), tuple(powers))

    @property
    def dim(self) -> int | None:
        n = len(self.center) or len(self.powers)
        return n or None


def _mul_terms(s: Term, t: Term) -> Term:
    dims = {k for k in (s.dim, t.dim) if k is not None}
    if len(dims) > 1:
        raise ValueError("cannot multiply fields of different dimensions")
    if not dims:
        return Term(s.coef * t.coef, s.q + t.q)
    d = dims.pop()
    s, t = s.padded(d), t.padded(d)
    a, b = np.asarray(s.center), np.asarray(t.center)
    q = s.q + t.q
    coef = s.coef * t.coef
    if q == 0 and (s.q or t.q):
        if not np.allclose(a, b):
            raise ValueError("cancelling Gaussian rates need a common center")
        center = a
    elif q != 0:
        center = (s.q * a + t.q * b) / q
        coef *= float(np.exp(-s.q * t.q / q * np.sum((a - b) ** 2)))
    else:
        center = np.zeros(d)
    powers = tuple(int(i + j) for i, j in zip(s.powers, t.powers))
    return Term(coef, q, tuple(float(c) for c in center), powers)


class Field:
    """A scalar field from the closed (Gaussian x polynomial) family.

    Fields are immutable; arithmetic returns new fields.

    Examples
    --------
    >>> f = Field.constant(2.0) * Field.gaussian(1.0, 0.5, dim=1)
    >>> float(f(np.zeros(1)))
    2.0
    """

    __slots__ = ("terms",)

    def __init__(self, terms: Iterable[Term] = ()):
        object.__setattr__(self, "terms", tuple(t for t in terms if t.coef != 0.0))

    def __setattr__(self, name, value):
        raise AttributeError("Field is immutable")

    # constructors -------------------------------------------------------
    @classmethod
    def constant(cls, value: float) -> "Field":
        return cls([Term(float(value))])

    @classmethod
    def gaussian(cls, p: float, q: float, center: Sequence[float] | None = None,
                 dim: int | None = None) -> "Field":
        if center is None and dim is not None:
            center = (0.0,) * dim
        return cls([Term(float(p), float(q), tuple(float(c) for c in center or ()))])

    @classmethod
    def monomial(cls, coef: float, powers: Sequence[int]) -> "Field":
        if any(p < 0 for p in powers):
            raise ValueError("monomial powers must be nonnegative")
        return cls([Term(float(coef), 0.0, (0.0,) * len(powers), tuple(int(p) for p in powers))])

    @classmethod
    def polynomial(cls, coeffs: dict[tuple[int, ...], float]) -> "Field":
        out = cls()
        for powers, c in coeffs.items():
            out = out + cls.monomial(c, powers)
        return out

    @classmethod
    def coordinate(cls, k: int, dim: int) -> "Field":
        powers = [0] * dim
        powers[k] = 1
        return cls.monomial(1.0, powers)

    @classmethod
    def squared_norm(cls, dim: int) -> "Field":
        out = cls()
        for k in range(dim):
            powers = [0] * dim
            powers[k] = 2
            out = out + cls.monomial(1.0, powers)
        return out

    # algebra ------------------------------------------------------------
    def __add__(self, other) -> "Field":
        other = _as_field(other)
        return Field(self.terms + other.terms)

    __radd__ = __add__

    def __neg__(self) -> "Field":
        return Field(Term(-t.coef, t.q, t.center, t.powers) for t in self.terms)

    def __sub__(self, other) -> "Field":
        return self + (-_as_field(other))

    def __rsub__(self, other) -> "Field":
        return _as_field(other) - self

    def __mul__(self, other) -> "Field":
        other = _as_field(other)
        return Field(_mul_terms(s, t) for s in self.terms for t in other.terms)

    __rmul__ = __mul__

    # queries ------------------------------------------------------------
    @property
    def dim(self) -> int | None:
        dims = {t.dim for t in self.terms} - {None}
        if len(dims) > 1:
            raise ValueError("field mixes dimensions")
        return dims.pop() if dims else None

    @property
    def is_constant(self) -> bool:
        return all(t.q == 0.0 and not any(t.powers) for t in self.terms)

    def constant_value(self) -> float:
        if not self.is_constant:
            raise ValueError("field is not constant")
        return float(sum(t.coef for t in self.terms))

    @property
    def is_bounded(self) -> bool:
        """Sufficient check: every term decays or is a plain constant."""
        return all(t.q > 0 or (t.q == 0 and not any(t.powers)) for t in self.terms)

    @property
    def degree(self) -> int:
        return max((sum(t.powers) for t in self.terms), default=0)

    @property
    def gauss_decay(self) -> float:
        """Smallest Gaussian rate among the terms (0 if some term does not decay)."""
        return min((t.q for t in self.terms), default=np.inf)

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        scalar = x.ndim == 1
        pts = np.atleast_2d(x)
        d = pts.shape[-1]
        out = np.zeros(pts.shape[0])
        for t in self.terms:
            t = t.padded(d)
            v = np.full(pts.shape[0], t.coef)
            if t.q:
                v = v * np.exp(-t.q * np.sum((pts - np.asarray(t.center)) ** 2, axis=1))
            for k, p in enumerate(t.powers):
                if p:
                    v = v * pts[:, k] ** p
            out += v
        return out[0] if scalar else out

    def expect_normal(self, mean, std: float) -> np.ndarray:
        """Closed-form ``E f(mean + std Z)``, ``Z ~ N(0, I)``, per row of ``mean``.

        Each term factorizes over coordinates: the Gaussian factor tilts the
        normal law and the monomial is a moment of the tilted law.
        """
        mean = np.atleast_2d(np.asarray(mean, dtype=float))
        n, d = mean.shape
        s2 = float(std) ** 2
        out = np.zeros(n)
        for t in self.terms:
            t = t.padded(d)
            damp = 1.0 + 2.0 * t.q * s2
            if damp <= 0:
                raise ValueError("Gaussian expectation diverges (growth rate exceeds the law's decay)")
            c = np.asarray(t.center)
            mt = (mean + 2.0 * t.q * s2 * c) / damp
            vt = s2 / damp
            v = np.full(n, t.coef * damp ** (-d / 2))
            if t.q:
                v = v * np.exp(-t.q * np.sum((mean - c) ** 2, axis=1) / damp)
            for k, p in enumerate(t.powers):
                if p:
                    v = v * _normal_moment(mt[:, k], vt, p)
            out += v
        return out

    def lebesgue_integral(self, d: int) -> float:
        """Closed-form ``int f dx``; every term needs a positive Gaussian rate."""
        total = 0.0
        for t in self.terms:
            t = t.padded(d)
            if not t.q > 0:
                raise ValueError("term without Gaussian decay is not Lebesgue integrable")
            c = np.asarray(t.center)
            v = t.coef * (math.pi / t.q) ** (d / 2)
            for k, p in enumerate(t.powers):
                if p:
                    v *= float(_normal_moment(c[k:k + 1], 0.5 / t.q, p)[0])
            total += v
        return total

    def pack(self, d: int) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """Flatten to ``(coef, q, center, powers)`` arrays for compiled kernels."""
        terms = [t.padded(d) for t in self.terms] or [Term(0.0, 0.0, (0.0,) * d, (0,) * d)]
        coef = np.array([t.coef for t in terms], dtype=np.float64)
        q = np.array([t.q for t in terms], dtype=np.float64)
        center = np.array([t.center for t in terms], dtype=np.float64).reshape(len(terms), d)
        powers = np.array([t.powers for t in terms], dtype=np.int64).reshape(len(terms), d)
        return coef, q, center, powers

    def __repr__(self) -> str:
        parts = []
        for t in self.terms:
            s = f"{t.coef:g}"
            if t.q:
                s += f"*exp(-{t.q:g}|x-{list(t.center)}|^2)"
            if any(t.powers):
                s += "*x^" + str(list(t.powers))
            parts.append(s)
        return "Field(" + " + ".join(parts or ["0"]) + ")"


def _normal_moment(m: np.ndarray, v: float, p: int) -> np.ndarray:
    # E Y^p for Y ~ N(m, v): sum over even j of C(p, j) m^(p-j) v^(j/2) (j-1)!!
    out = np.zeros_like(m)
    dfact = 1.0
    for j in range(0, p + 1, 2):
        if j:
            dfact *= j - 1
        out += math.comb(p, j) * m ** (p - j) * v ** (j // 2) * dfact
    return out


def _as_field(v) -> Field:
    if isinstance(v, Field):
        return v
    if np.isscalar(v):
        return Field.constant(float(v))
    raise TypeError(f"cannot convert {type(v).__name__} to Field")


def pack_fields(fields: Sequence[Field], d: int):
    """Concatenate several packed fields; returns arrays plus term offsets."""
    packs = [f.pack(d) for f in fields]
    offsets = np.zeros(len(packs) + 1, dtype=np.int64)
    offsets[1:] = np.cumsum([p[0].size for p in packs])
    coef = np.concatenate([p[0] for p in packs])
    q = np.concatenate([p[1] for p in packs])
    center = np.concatenate([p[2] for p in packs], axis=0)
    powers = np.concatenate([p[3] for p in packs], axis=0)
    return coef, q, center, powers, offsets
