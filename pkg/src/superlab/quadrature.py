"""Quadrature rules used by every deterministic oracle.

Spatial integrals use tensorized Gauss-Hermite rules (probabilists' form,
i.e. expectations under a standard normal), time integrals use composite
Gauss-Legendre panels.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
import math

import numpy as np
from numpy.polynomial.hermite_e import hermegauss
from numpy.polynomial.legendre import leggauss


class QuadratureError(ValueError):
    """Raised when an integral cannot be evaluated safely."""


@dataclass(frozen=True)
class QuadratureSpec:
    """Accuracy knobs shared by the oracles.

    Attributes
    ----------
    order : int
        Gauss-Hermite nodes per axis.
    panels : int
        Number of composite Gauss-Legendre panels in time.
    panel_order : int
        Gauss-Legendre nodes per panel.
    t_max : float or None
        Resolvent truncation horizon; ``None`` lets the resolvent choose it
        from ``tol``.
    tol : float
        Target absolute accuracy for truncations.
    """

    order: int = 64
    panels: int = 12
    panel_order: int = 16
    t_max: float | None = None
    tol: float = 1e-13

    def __post_init__(self):
        if self.order < 2:
            raise ValueError("quadrature order must be at least 2")
        if self.panels < 1 or self.panel_order < 1:
            raise ValueError("need at least one time panel with one node")
        if self.tol <= 0:
            raise ValueError("tolerance must be positive")


@lru_cache(maxsize=64)
def _gh_1d(order: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = hermegauss(order)
    return x, w / math.sqrt(2.0 * math.pi)


@lru_cache(maxsize=64)
def gauss_hermite(order: int, d: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes ``(M, d)`` and weights ``(M,)`` with ``sum(w g(z)) ~ E g(Z)``, ``Z ~ N(0, I_d)``."""
    x, w = _gh_1d(order)
    if d == 1:
        return x[:, None].copy(), w.copy()
    grids = np.meshgrid(*([x] * d), indexing="ij")
    nodes = np.stack([g.ravel() for g in grids], axis=1)
    wg = np.meshgrid(*([w] * d), indexing="ij")
    weights = np.prod(np.stack([g.ravel() for g in wg], axis=1), axis=1)
    keep = weights > 1e-300
    return nodes[keep], weights[keep]


def expect_normal(g, mean, std, quad: QuadratureSpec) -> np.ndarray:
    """``E g(mean + std * Z)`` for each row of ``mean``.

    ``g`` maps an ``(n, d)`` array of points to ``(n,)`` values.  ``std`` is a
    scalar (isotropic covariance ``std**2 I``).
    """
    mean = np.atleast_2d(np.asarray(mean, dtype=float))
    n, d = mean.shape
    nodes, weights = gauss_hermite(quad.order, d)
    pts = mean[:, None, :] + std * nodes[None, :, :]
    vals = np.asarray(g(pts.reshape(-1, d)), dtype=float).reshape(n, -1)
    return vals @ weights


def gaussian_integral(g, d: int, rate: float, quad: QuadratureSpec,
                      center=None) -> float:
    """Lebesgue integral of ``g(x) exp(-rate |x - center|^2)`` over R^d."""
    if rate <= 0:
        raise QuadratureError("Gaussian weight needs a positive rate")
    center = np.zeros(d) if center is None else np.asarray(center, dtype=float)
    std = 1.0 / math.sqrt(2.0 * rate)
    mass = (math.pi / rate) ** (d / 2)
    return float(mass * expect_normal(g, center[None, :], std, quad)[0])


def legendre_panels(a: float, b: float, panels: int, order: int,
                    refine: str | None = None, ratio: float = 0.5):
    """Composite Gauss-Legendre rule on ``[a, b]``.

    With ``refine="right"`` (or ``"left"``) panel widths shrink geometrically
    by ``ratio`` toward that endpoint.
    """
    if b < a:
        raise ValueError("need a <= b")
    if b == a:
        return np.zeros(0), np.zeros(0)
    if refine is None:
        edges = np.linspace(a, b, panels + 1)
    else:
        widths = ratio ** np.arange(panels)
        widths = widths / widths.sum() * (b - a)
        if refine == "left":
            widths = widths[::-1]
        elif refine != "right":
            raise ValueError("refine must be None, 'left' or 'right'")
        edges = a + np.concatenate([[0.0], np.cumsum(widths)])
        edges[-1] = b
    x, w = leggauss(order)
    lo, hi = edges[:-1, None], edges[1:, None]
    nodes = 0.5 * (hi - lo) * x[None, :] + 0.5 * (hi + lo)
    weights = 0.5 * (hi - lo) * w[None, :]
    return nodes.ravel(), weights.ravel()
