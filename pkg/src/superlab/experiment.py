"""Multi-path experiments: moment validation, martingale diagnostics and SLLN checks.

Paths run in a thread pool (the compiled kernels release the GIL) and are
always reduced in path order, so reports do not depend on the worker count.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
import math
import os
from typing import Sequence

import numpy as np

from . import semigroup as sg
from .model import ModelSpec
from .particle import SimConfig, TrajectoryRecord, simulate_path
from .particle.engines import genealogy_applicable, scheme_laplace_functional
from .quadrature import QuadratureSpec
from .spectral import SpectralData, registry_lookup
from .testfunctions import Pointwise, Tabulated, TestFunction, constant


def default_workers() -> int:
    return os.cpu_count() or 1


def run_paths(spec: ModelSpec, cfg: SimConfig, observables: Sequence[TestFunction],
              sd: SpectralData | None, n_paths: int, workers: int | None = None) -> list[TrajectoryRecord]:
    """Simulate paths ``0 .. n_paths - 1``; results come back in path order."""
    if n_paths < 1:
        raise ValueError("need at least one path")
    workers = workers or default_workers()

    def one(i):
        return simulate_path(spec, cfg, observables, sd, path_id=i)

    if workers == 1:
        return [one(i) for i in range(n_paths)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, range(n_paths)))


# statistics -------------------------------------------------------------

def mean_se(x) -> tuple[float, float]:
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        return math.nan, math.nan
    se = float(np.std(x, ddof=1) / math.sqrt(x.size)) if x.size > 1 else math.nan
    return float(np.mean(x)), se


def var_se(x) -> tuple[float, float]:
    """Sample variance and its large-sample standard error ``sqrt((m4 - s^4) / n)``."""
    x = np.asarray(x, dtype=float)
    n = x.size
    v = float(np.var(x, ddof=1))
    c = x - x.mean()
    m4 = float(np.mean(c ** 4))
    return v, math.sqrt(max(m4 - v * v, 0.0) / n)


def z_score(emp: float, target: float, se: float) -> float:
    """``(emp - target) / se``; agreement to rounding counts as ``z = 0``."""
    if abs(emp - target) <= 1e-12 * max(1.0, abs(target)):
        return 0.0
    if se == 0 or not math.isfinite(se):
        return math.inf
    return (emp - target) / se


def iqr(x) -> float:
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        return math.nan
    q1, q3 = np.percentile(x, [25, 75])
    return float(q3 - q1)


# moment validation ------------------------------------------------------------

@dataclass
class Cell:
    quantity: str
    f: str
    t: float
    empirical: float
    oracle: float
    se: float
    z: float
    scheme_oracle: float = math.nan

    @property
    def rel_err(self) -> float:
        return abs(self.empirical - self.oracle) / abs(self.oracle) if self.oracle else math.nan


@dataclass
class GrowthCheck:
    f: str
    slope: float
    bound: float
    times: tuple[float, ...]

    @property
    def passed(self) -> bool:
        return self.slope <= self.bound


@dataclass
class MomentReport:
    cells: list[Cell]
    growth: list[GrowthCheck] = field(default_factory=list)
    n_paths: int = 0

    @property
    def pass_fraction(self) -> float:
        ok = [abs(c.z) <= 3 for c in self.cells]
        return float(np.mean(ok)) if ok else 0.0

    @property
    def passed(self) -> bool:
        return bool(self.cells) and self.pass_fraction >= 0.95 and all(g.passed for g in self.growth)

    def cell(self, quantity: str, f: str, t: float) -> Cell:
        for c in self.cells:
            if c.quantity == quantity and c.f == f and c.t == t:
                return c
        raise KeyError((quantity, f, t))

    header = ("quantity", "f", "t", "empirical", "oracle", "se", "z", "scheme_oracle")

    def rows(self):
        return [(c.quantity, c.f, c.t, c.empirical, c.oracle, c.se, c.z, c.scheme_oracle)
                for c in self.cells]

    def summary(self) -> str:
        lines = [f"moment cells with |z| <= 3: {self.pass_fraction:.1%} of {len(self.cells)}"]
        for g in self.growth:
            lines.append(f"variance growth slope for {g.f}: {g.slope:.4f} (bound {g.bound:.4f}) "
                         f"{'PASS' if g.passed else 'FAIL'}")
        return "\n".join(lines)


def growth_rate_bound(sd: SpectralData, slack: float = 0.05) -> float:
    """``2 (lambda0 - a~) + slack`` with ``a~ = min(gap, lambda0 / 2) / 2``."""
    a_tilde = min(sd.gap, sd.lambda0 / 2) / 2
    return 2 * (sd.lambda0 - a_tilde) + slack


def log_slope(ts, ys) -> float:
    ts, ys = np.asarray(ts, float), np.asarray(ys, float)
    return float(np.polyfit(ts, np.log(ys), 1)[0])


def _is_centered(f: TestFunction, sd: SpectralData | None, quad) -> bool:
    if sd is None or f.constant_value() is not None:
        return False
    try:
        return abs(sd.pairing(f, quad)) < 1e-10
    except (ValueError, ArithmeticError):
        return False


def run_moment_validation(spec: ModelSpec, cfg: SimConfig, f_list: Sequence[TestFunction],
                          n_paths: int, quad: QuadratureSpec | None = None,
                          workers: int | None = None, growth_window=(2.0, 6.0)) -> MomentReport:
    """Empirical mean and variance of ``<f, X_t>`` against the oracles.

    The z-score of a variance cell uses the fourth-moment standard error.
    Centered observables (``<f, phi0_hat>_m = 0``) also get the variance growth
    check over ``growth_window`` against the centered-variance growth rate.
    """
    quad = quad or QuadratureSpec()
    try:
        sd = registry_lookup(spec)
    except LookupError:
        sd = None
    recs = run_paths(spec, cfg, f_list, sd, n_paths, workers)
    times = cfg.observation_times
    binary_const = genealogy_applicable(spec)
    cells: list[Cell] = []
    growth: list[GrowthCheck] = []
    for f in f_list:
        vals = np.array([r.values[f.name] for r in recs])
        emp_vars = []
        for i, t in enumerate(times):
            m, se = mean_se(vals[:, i])
            mo = sg.mean_under(spec, t, f, quad)
            cells.append(Cell("mean", f.name, t, m, mo, se, z_score(m, mo, se), mo))
            v, vse = var_se(vals[:, i])
            vo = sg.variance_under(spec, t, f, quad)
            vs = vo + sg.scheme_variance_excess(spec, t, f, cfg.epsilon, quad) if binary_const else math.nan
            cells.append(Cell("variance", f.name, t, v, vo, vse, z_score(v, vo, vse), vs))
            emp_vars.append(v)
        lo, hi = growth_window
        sel = [i for i, t in enumerate(times) if lo <= t <= hi]
        if len(sel) >= 2 and _is_centered(f, sd, quad):
            ts = [times[i] for i in sel]
            growth.append(GrowthCheck(f.name, log_slope(ts, [emp_vars[i] for i in sel]),
                                      growth_rate_bound(sd), tuple(ts)))
    return MomentReport(cells, growth, n_paths)


# martingale ---------------------------------------------------------------------

@dataclass
class MartingaleReport:
    rows_: list[dict]
    survival: dict
    zero_iff_extinct: bool
    n_paths: int

    header = ("t", "quantity", "empirical", "oracle", "se", "z")

    def rows(self):
        out = [(r["t"], r["quantity"], r["empirical"], r["oracle"], r["se"], r["z"]) for r in self.rows_]
        s = self.survival
        out.append((s["t"], "survival_fraction", s["empirical"], s["oracle"], s["se"], s["z"]))
        return out

    def get(self, quantity: str, t: float) -> dict:
        for r in self.rows_:
            if r["quantity"] == quantity and r["t"] == t:
                return r
        raise KeyError((quantity, t))

    @property
    def passed(self) -> bool:
        return all(abs(r["z"]) <= 3 for r in self.rows_) and abs(self.survival["z"]) <= 3 \
            and self.zero_iff_extinct

    def summary(self) -> str:
        lines = [f"{q:>4} t={t:<5g} emp={e:.5f} oracle={o:.5f} z={z:+.2f}"
                 for t, q, e, o, _, z in self.rows()]
        lines.append(f"W_t = 0 exactly on extinct paths: {self.zero_iff_extinct}")
        return "\n".join(lines)


def run_martingale_test(spec: ModelSpec, cfg: SimConfig, sd: SpectralData, n_paths: int,
                        t_grid: Sequence[float], quad: QuadratureSpec | None = None,
                        workers: int | None = None) -> MartingaleReport:
    """``E W_t`` constancy, ``E W_t^2`` against the variance formula, survival at the last time."""
    quad = quad or QuadratureSpec()
    cfg = replace(cfg, observation_times=tuple(t_grid))
    recs = run_paths(spec, cfg, [], sd, n_paths, workers)
    W = np.array([r.W for r in recs])
    counts = np.array([r.counts for r in recs])
    phi = _phi0_function(sd)
    w0 = math.fsum(m * float(sd.phi0(np.asarray(x))) for x, m in spec.initial.atoms)
    rows = []
    for i, t in enumerate(cfg.observation_times):
        m, se = mean_se(W[:, i])
        rows.append(dict(t=t, quantity="W", empirical=m, oracle=w0, se=se, z=z_score(m, w0, se)))
        m2, se2 = mean_se(W[:, i] ** 2)
        o2 = w0 ** 2 + math.exp(-2 * sd.lambda0 * t) * sg.variance_under(spec, t, phi, quad)
        rows.append(dict(t=t, quantity="W^2", empirical=m2, oracle=o2, se=se2, z=z_score(m2, o2, se2)))
    alive = counts[:, -1] > 0
    p_emp = float(alive.mean())
    ext = sg.extinction_probability(spec).probability
    p_or = 1.0 - ext ** spec.initial.total_mass
    se = math.sqrt(p_or * (1 - p_or) / n_paths) if 0 < p_or < 1 else 0.0
    surv = dict(t=cfg.observation_times[-1], empirical=p_emp, oracle=p_or, se=se, z=z_score(p_emp, p_or, se))
    zero_iff = bool(np.array_equal(W == 0, counts == 0))
    return MartingaleReport(rows, surv, zero_iff, n_paths)


def _phi0_function(sd: SpectralData) -> TestFunction:
    from .testfunctions import Smooth

    return Smooth(sd.phi0, "phi0")


# Laplace functional --------------------------------------------------------------

@dataclass
class LaplaceReport:
    rows_: list[dict]

    header = ("theta", "t", "empirical", "oracle", "scheme_exact", "se", "z")

    def rows(self):
        return [tuple(r[k] for k in self.header) for r in self.rows_]

    @property
    def passed(self) -> bool:
        return all(abs(r["z"]) <= 3 for r in self.rows_)


def run_laplace_test(spec: ModelSpec, cfg: SimConfig, thetas: Sequence[float], n_paths: int,
                     workers: int | None = None) -> LaplaceReport:
    """Empirical ``E exp(-theta <1, X_t>)`` against ``exp(-u_theta(t) |mu|)``."""
    one = constant(1.0, "one")
    recs = run_paths(spec, cfg, [one], None, n_paths, workers)
    mass = np.array([r.values["one"] for r in recs])
    rows = []
    for theta in thetas:
        for i, t in enumerate(cfg.observation_times):
            m, se = mean_se(np.exp(-theta * mass[:, i]))
            target = math.exp(-sg.log_laplace_ode(spec, theta, t) * spec.initial.total_mass)
            exact = scheme_laplace_functional(spec, cfg.epsilon, theta, t) \
                if genealogy_applicable(spec) else math.nan
            rows.append(dict(theta=theta, t=t, empirical=m, oracle=target, scheme_exact=exact, se=se,
                             z=z_score(m, target, se)))
    return LaplaceReport(rows)


def scheme_bias(spec: ModelSpec, epsilons: Sequence[float], theta: float, t: float) -> list[float]:
    """Exact ``|E^eps exp(-theta <1, X_t>) - exp(-u_theta(t) |mu|)|`` per epsilon."""
    target = math.exp(-sg.log_laplace_ode(spec, theta, t) * spec.initial.total_mass)
    return [abs(scheme_laplace_functional(spec, e, theta, t) - target) for e in epsilons]


# SLLN -------------------------------------------------------------------------------

def resolvent_observable(spec: ModelSpec, q: float, g: TestFunction, lo: float = -8.0, hi: float = 8.0,
                         tol: float = 1e-6, quad: QuadratureSpec | None = None,
                         name: str | None = None) -> Tabulated:
    """``U_q g`` tabulated on ``[lo, hi]`` (cubic spline, error below ``tol``)."""
    if spec.spatial.d != 1:
        raise ValueError("tabulated resolvent observables are one-dimensional")
    quad = quad or QuadratureSpec()
    exact = lambda y: sg.resolvent(spec, q, g, y, quad)  # noqa: E731
    sup = g.sup_bound / (q - spec.alpha_constant) if g.sup_bound is not None else None
    return Tabulated(exact, lo, hi, tol=tol, name=name or f"U_{q:g}[{g.name}]",
                     sup_bound=sup, decay=min(g.decay, spec.spatial.c), c0=g.c0,
                     resolvent_of=(q, g))


def pairing_target(sd: SpectralData, f: TestFunction, spec: ModelSpec,
                   quad: QuadratureSpec | None = None) -> float:
    """``<f, phi0_hat>_m``; resolvent observables are paired through the exact oracle."""
    quad = quad or QuadratureSpec()
    src = getattr(f, "resolvent_of", None)
    if src is not None:
        q, g = src
        f = Pointwise(lambda y: sg.resolvent(spec, q, g, y, quad), decay=f.decay)
    return sd.pairing(f, quad)


@dataclass
class SllnCell:
    f: str
    t: float
    scaled_mean: float
    scaled_se: float
    ratio_mean: float
    ratio_se: float
    ratio_median: float
    ratio_mad: float
    ratio_iqr: float
    target: float
    w_mean: float
    n_surviving: int

    @property
    def ratio_z(self) -> float:
        return z_score(self.ratio_mean, self.target, self.ratio_se)

    @property
    def scaled_z(self) -> float:
        return z_score(self.scaled_mean, self.target * self.w_mean, self.scaled_se)


@dataclass
class SllnReport:
    cells: list[SllnCell]
    survival_fraction: float
    mismatch_bound: float
    burn_in: float
    n_paths: int
    degenerate: bool = False

    header = ("f", "t", "quantity", "value")

    def cell(self, f: str, t: float) -> SllnCell:
        for c in self.cells:
            if c.f == f and c.t == t:
                return c
        raise KeyError((f, t))

    def names(self) -> list[str]:
        return list(dict.fromkeys(c.f for c in self.cells))

    def iqr_shrinks(self, f: str) -> bool:
        cs = [c for c in self.cells if c.f == f and c.t >= self.burn_in]
        return len(cs) >= 2 and cs[-1].ratio_iqr < cs[0].ratio_iqr

    def mad_trend(self, f: str) -> bool:
        cs = [c.ratio_mad for c in self.cells if c.f == f and c.t >= self.burn_in]
        return all(b <= a for a, b in zip(cs, cs[1:]))

    def rows(self):
        out = []
        for c in self.cells:
            for k in ("scaled_mean", "scaled_se", "ratio_mean", "ratio_se", "ratio_median", "ratio_mad",
                      "ratio_iqr", "target", "w_mean", "n_surviving"):
                out.append((c.f, c.t, k, float(getattr(c, k))))
            out.append((c.f, c.t, "ratio_z", c.ratio_z))
            out.append((c.f, c.t, "scaled_z", c.scaled_z))
        out.append(("", math.nan, "survival_fraction", self.survival_fraction))
        out.append(("", math.nan, "mismatch_bound", self.mismatch_bound))
        return out

    def summary(self) -> str:
        lines = [f"survival fraction {self.survival_fraction:.4f} "
                 f"(P(alive at T, W_inf = 0) <= {self.mismatch_bound:.2e})"]
        T = max(c.t for c in self.cells) if self.cells else math.nan
        for f in self.names():
            c = self.cell(f, T)
            lines.append(f"{f}: ratio {c.ratio_mean:.5f} +- {c.ratio_se:.5f} vs target {c.target:.5f} "
                         f"(z={c.ratio_z:+.2f}); IQR shrinks after burn-in: {self.iqr_shrinks(f)}")
        return "\n".join(lines)


def extinction_mismatch(spec: ModelSpec, T: float) -> float:
    """``P(alive at T) - P(W_inf > 0)``: extinction after ``T`` on a surviving path."""
    try:
        q = sg.extinction_probability(spec).probability
        dead_by_T = math.exp(-sg.log_laplace_ode(spec, 1e8, T))
    except sg.UnsupportedModelError:
        return math.nan
    mass = spec.initial.total_mass
    return max(q ** mass - dead_by_T ** mass, 0.0)


def run_slln(spec: ModelSpec, cfg: SimConfig, f_list: Sequence[TestFunction], sd: SpectralData,
             n_paths: int, burn_in: float = 2.0, quad: QuadratureSpec | None = None,
             workers: int | None = None, records: list[TrajectoryRecord] | None = None) -> SllnReport:
    """Ratio statistic ``<f, X_t> / <phi0, X_t>`` on paths alive at the final time.

    Also reports the mean of ``exp(-lambda0 t) <f, X_t>`` over all paths,
    whose target is ``<f, phi0_hat>_m`` times the sample mean of ``W_t``.
    """
    quad = quad or QuadratureSpec()
    recs = records if records is not None else run_paths(spec, cfg, f_list, sd, n_paths, workers)
    times = cfg.observation_times
    counts = np.array([r.counts for r in recs])
    W = np.array([r.W for r in recs])
    alive = counts[:, -1] > 0
    cells = []
    for f in f_list:
        vals = np.array([r.values[f.name] for r in recs])
        target = pairing_target(sd, f, spec, quad)
        for i, t in enumerate(times):
            scale = math.exp(-sd.lambda0 * t)
            sm, sse = mean_se(scale * vals[:, i])
            phi_mass = W[alive, i] / scale
            with np.errstate(divide="ignore", invalid="ignore"):
                ratio = vals[alive, i] / phi_mass
            ratio = ratio[np.isfinite(ratio)]
            rm, rse = mean_se(ratio)
            med = float(np.median(ratio)) if ratio.size else math.nan
            mad = float(np.median(np.abs(ratio - target))) if ratio.size else math.nan
            cells.append(SllnCell(f.name, t, sm, sse, rm, rse, med, mad, iqr(ratio), target,
                                  float(W[:, i].mean()), int(ratio.size)))
    return SllnReport(cells, float(alive.mean()), extinction_mismatch(spec, times[-1]), burn_in,
                      len(recs), degenerate=not alive.any())


# deterministic diagnostics ------------------------------------------------------------

@dataclass
class SlopeCheck:
    slope: float
    bound: float
    detail: dict

    @property
    def passed(self) -> bool:
        return self.slope <= self.bound


def gap_decay_check(spec: ModelSpec, f: TestFunction, ts: Sequence[float], xs,
                    slack: float = 0.1, quad: QuadratureSpec | None = None) -> SlopeCheck:
    """Slope of ``log|exp(-lambda0 t) T_t f(x) - phi0(x) <f, phi0_hat>_m|`` in ``t``.

    Must not exceed ``-(gap - slack)``; the worst slope over ``xs`` is reported.
    """
    quad = quad or QuadratureSpec()
    sd = registry_lookup(spec)
    pts = np.atleast_2d(np.asarray(xs, dtype=float))
    target = sd.phi0(pts) * sd.pairing(f, quad)
    res = np.array([np.abs(math.exp(-sd.lambda0 * t) * np.atleast_1d(sg.mean_semigroup(spec, t, f, pts, quad))
                           - target) for t in ts])
    slopes = [log_slope(ts, res[:, j]) for j in range(pts.shape[0])]
    return SlopeCheck(max(slopes), -(sd.gap - slack), dict(slopes=slopes, residuals=res))


def variance_growth_check(spec: ModelSpec, f: TestFunction, ts: Sequence[float],
                          slack: float = 0.05, quad: QuadratureSpec | None = None) -> SlopeCheck:
    """Slope of ``log Var_mu <f, X_t>`` from the variance oracle against the centered-variance growth rate."""
    quad = quad or QuadratureSpec()
    sd = registry_lookup(spec)
    vs = [sg.variance_under(spec, t, f, quad) for t in ts]
    return SlopeCheck(log_slope(ts, vs), growth_rate_bound(sd, slack), dict(variances=vs))


# plots -----------------------------------------------------------------------------------

def plot_trajectories(records: Sequence[TrajectoryRecord], sd: SpectralData, f_name: str, path,
                      max_paths: int = 40) -> None:
    """SVG of ``exp(-lambda0 t) <f, X_t>`` and of the ratio statistic for the first paths."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "superlab"
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.5))
    for r in records[:max_paths]:
        t = np.asarray(r.times)
        v = np.asarray(r.values[f_name])
        w = np.asarray(r.W)
        ax1.plot(t, np.exp(-sd.lambda0 * t) * v, lw=0.7, alpha=0.6)
        with np.errstate(divide="ignore", invalid="ignore"):
            ax2.plot(t, v / (w * np.exp(sd.lambda0 * t)), lw=0.7, alpha=0.6)
    ax1.set_xlabel("t")
    ax1.set_ylabel(f"exp(-lambda0 t) <{f_name}, X_t>")
    ax2.set_xlabel("t")
    ax2.set_ylabel("ratio statistic")
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
