"""Event schemes advancing a population to a target time.

Both engines realize the same mass-eps branching particle system:
binary branching at rate ``2 beta b / eps`` with two offspring with
probability ``1/2 + eps a / (4 b)`` (none otherwise), spawn clusters of
``round(y_i / eps)`` particles at rate ``eps beta w_i``, and a compensating
death clock at rate ``beta sum_i w_i round(y_i / eps) eps``, with exact OU
motion in between.

``thinning`` simulates every event against declared rate bounds.
``genealogy`` applies to spatially homogeneous binary mechanisms: there the
particle count is a linear birth-death process whose transition law and
reconstructed genealogy are known in closed form, so a whole interval is
sampled at once.
"""

from __future__ import annotations

import math

import numpy as np

from ..fields import pack_fields
from ..model import ConfigurationError, ModelSpec, max_admissible_epsilon
from . import kernels as K
from .state import CapacityError, PopulationState, SimConfig

_U_CHUNK = 1 << 20


def spawn_sizes(spec: ModelSpec, epsilon: float) -> np.ndarray:
    """Cluster sizes ``round(y_i / eps)``, rejecting more than 1% mass error."""
    ks = []
    for at in spec.branching.atoms:
        k = int(round(at.size / epsilon))
        if k < 1 or abs(k * epsilon - at.size) > 0.01 * at.size:
            raise ConfigurationError(
                f"jump size {at.size:g} is not resolved by epsilon = {epsilon:g} "
                f"(round(y/eps) * eps = {k * epsilon:g})")
        ks.append(k)
    return np.array(ks, dtype=np.int64)


def genealogy_applicable(spec: ModelSpec) -> bool:
    br = spec.branching
    return br.is_homogeneous and not br.atoms


def choose_engine(spec: ModelSpec, cfg: SimConfig) -> str:
    if cfg.engine == "auto":
        return "genealogy" if genealogy_applicable(spec) else "thinning"
    if cfg.engine == "genealogy" and not genealogy_applicable(spec):
        raise ConfigurationError("the genealogy engine needs constant coefficients and no jump atoms")
    return cfg.engine


def check_epsilon(spec: ModelSpec, cfg: SimConfig, x_samples=None) -> None:
    """Offspring probability must lie in [0, 1]: ``eps <= inf 2 b / |a|``."""
    br = spec.branching
    if not br.is_homogeneous and x_samples is None:
        rng = np.random.default_rng(0)
        x_samples = np.concatenate([np.zeros((1, spec.spatial.d)),
                                    4.0 * rng.standard_normal((4000, spec.spatial.d))])
    eps_max = max_admissible_epsilon(br, x_samples)
    if cfg.epsilon > eps_max * (1 + 1e-12):
        raise ConfigurationError(
            f"epsilon = {cfg.epsilon:g} puts the offspring probability outside [0, 1]; "
            f"the largest admissible epsilon is {eps_max:g}")
    spawn_sizes(spec, cfg.epsilon)


def move_all(state: PopulationState, spec: ModelSpec, s: np.ndarray | float) -> None:
    """Exact OU move of every tracked particle over (per-particle) durations ``s``."""
    if state.positions is None or state.n == 0:
        return
    motion = spec.spatial
    r = motion.sign * motion.c
    s = np.asarray(s, dtype=float)
    F = np.exp(r * s)
    V = np.expm1(2 * r * s) / (2 * r)
    z = state.rng.standard_normal((state.n, state.d))
    pos = state.positions[: state.n]
    if F.ndim:
        pos[:] = F[:, None] * pos + np.sqrt(V)[:, None] * z
    else:
        pos[:] = F * pos + math.sqrt(V) * z


# thinning -------------------------------------------------------------------

class _ThinningModel:
    def __init__(self, spec: ModelSpec, cfg: SimConfig):
        br = spec.branching
        bd = br.bounds
        if bd is None:
            raise ConfigurationError("the thinning engine needs declared sup bounds")
        d = spec.spatial.d
        fields = [br.a, br.b, br.beta] + [at.weight for at in br.atoms]
        self.coef, self.q, self.center, self.powers, self.offsets = pack_fields(fields, d)
        self.ks = spawn_sizes(spec, cfg.epsilon)
        self.bb_bound = bd.beta * bd.b
        self.w_bounds = np.array([bd.beta * w for w in bd.w], dtype=float)
        self.beta_w_bound = float(bd.beta * sum(w * k * cfg.epsilon for w, k in zip(bd.w, self.ks)))
        self.sign = float(spec.spatial.sign)
        self.c = float(spec.spatial.c)


def _thinning_step(state: PopulationState, t_target: float, spec: ModelSpec, cfg: SimConfig) -> None:
    if state.positions is None:
        raise ConfigurationError("the thinning engine tracks positions; count-only mode is unavailable")
    tm = _ThinningModel(spec, cfg)
    d = state.d
    cap = max(state.n, 16)
    cap = min(max(cap, 2 * state.n), cfg.max_particles)
    pos = np.empty((cap, d))
    pos[: state.n] = state.positions[: state.n]
    tl = np.full(cap, state.time)
    n, t = state.n, state.time
    U = np.empty(0)
    Z = np.empty(0)
    ui = zi = 0
    chunk = 1024
    while True:
        status, n, t, ev, ui, zi, info = K.thinning_run(
            pos, tl, n, t, t_target, tm.sign, tm.c, tm.coef, tm.q, tm.center, tm.powers, tm.offsets,
            cfg.epsilon, tm.bb_bound, tm.w_bounds, tm.ks, tm.beta_w_bound, cfg.max_particles,
            U, ui, Z, zi)
        state.event_count += int(ev)
        if status == K.DONE:
            break
        if status == K.NEED_RNG:
            # grow refills geometrically so short runs draw little
            size = chunk
            chunk = min(2 * chunk, _U_CHUNK)
            U = np.concatenate([U[ui:], state.rng.random(size)])
            Z = np.concatenate([Z[zi:], state.rng.standard_normal(size * d)])
            ui = zi = 0
        elif status == K.GROW:
            new = min(2 * pos.shape[0], cfg.max_particles)
            pos = np.concatenate([pos, np.empty((new - pos.shape[0], d))])
            tl = np.concatenate([tl, np.empty(new - tl.shape[0])])
        else:
            # bring the partial state to a consistent time before reporting
            state.positions, state.n, state.time = pos, n, t
            move_all(state, spec, t - tl[:n])
            if status == K.CAPACITY:
                raise CapacityError(
                    f"particle count would exceed max_particles = {cfg.max_particles} at t = {t:.6g}",
                    state)
            if status == K.P2_RANGE:
                raise ConfigurationError(
                    f"offspring probability outside [0, 1] at a sampled position; "
                    f"the largest admissible epsilon there is {info:g}")
            raise ConfigurationError(f"declared rate bound violated (acceptance ratio {info:.6g})")
    state.positions, state.n, state.time = pos, n, t_target
    move_all(state, spec, t_target - tl[:n])


# genealogy ------------------------------------------------------------------

class BirthDeath:
    """Linear birth-death process of particle counts for constant coefficients."""

    def __init__(self, spec: ModelSpec, epsilon: float):
        k = spec.branching.constants()
        beta, a, b = k["beta"], k["a"], k["b"]
        self.lam = beta * b / epsilon + beta * a / 2
        self.mu = beta * b / epsilon - beta * a / 2
        self.r = beta * a

    def survival(self, T: float) -> float:
        """Probability a single particle has descendants after time ``T``."""
        lam, mu, r = self.lam, self.mu, self.r
        if lam == 0:
            return math.exp(-mu * T)
        if r == 0:
            return 1.0 / (1.0 + lam * T)
        # r e^{rT} / (lam e^{rT} - mu), arranged to avoid overflow
        if r > 0:
            return r / (lam - mu * math.exp(-r * T))
        e = math.exp(r * T)
        return r * e / (lam * e - mu)

    def geometric_ratio(self, T: float) -> float:
        """``P(N >= n + 1 | N >= n)`` for the size of a surviving family."""
        lam, mu, r = self.lam, self.mu, self.r
        if lam == 0:
            return 0.0
        if r == 0:
            return lam * T / (1.0 + lam * T)
        if r > 0:
            return lam * -math.expm1(-r * T) / (lam - mu * math.exp(-r * T))
        e = math.exp(r * T)
        return lam * math.expm1(r * T) / (lam * e - mu)

    def node_depths(self, u: np.ndarray, T: float) -> np.ndarray:
        """Inverse-CDF draws of coalescent-point depths conditioned on ``< T``."""
        g = self.geometric_ratio(T)
        v = u * g
        odds = v / (1.0 - v)
        lam, r = self.lam, self.r
        if r == 0:
            return odds / lam
        return np.log1p(r / lam * odds) / r


def _genealogy_step(state: PopulationState, t_target: float, spec: ModelSpec, cfg: SimConfig) -> None:
    T = t_target - state.time
    if T <= 0 or state.n == 0:
        state.time = t_target
        return
    bd = BirthDeath(spec, cfg.epsilon)
    rng = state.rng
    p = bd.survival(T)
    g = bd.geometric_ratio(T)
    if state.positions is None:
        k = int(rng.binomial(state.n, p))
        n = k + (int(rng.negative_binomial(k, 1.0 - g)) if k > 0 and g > 0 else 0)
        if n > cfg.max_particles:
            state.time = t_target
            raise CapacityError(
                f"particle count {n} exceeds max_particles = {cfg.max_particles} at t = {t_target:.6g}",
                state)
        state.n, state.time = n, t_target
        state.event_count += n
        return
    alive = rng.random(state.n) < p
    roots = state.positions[: state.n][alive]
    sizes = rng.geometric(1.0 - g, size=roots.shape[0]).astype(np.int64) if g > 0 else \
        np.ones(roots.shape[0], dtype=np.int64)
    n = int(sizes.sum())
    if n > cfg.max_particles:
        state.time = t_target
        state.n = 0
        raise CapacityError(
            f"particle count {n} exceeds max_particles = {cfg.max_particles} at t = {t_target:.6g}",
            state)
    depths = bd.node_depths(rng.random(n - roots.shape[0]), T)
    Z = rng.standard_normal((2 * n - roots.shape[0]) * state.d)
    out = np.empty((n, state.d))
    K.genealogy_positions(roots, sizes, depths, Z, T, float(spec.spatial.sign), float(spec.spatial.c), out)
    state.positions, state.n, state.time = out, n, t_target
    state.event_count += n


def step_to(state: PopulationState, t_target: float, spec: ModelSpec, cfg: SimConfig) -> PopulationState:
    """Evolve ``state`` in place to ``t_target`` and return it."""
    if t_target < state.time:
        raise ValueError(f"cannot step backwards from t = {state.time:g} to {t_target:g}")
    check_epsilon(spec, cfg)
    if t_target == state.time:
        return state
    engine = choose_engine(spec, cfg)
    if engine == "genealogy":
        _genealogy_step(state, t_target, spec, cfg)
    else:
        _thinning_step(state, t_target, spec, cfg)
    return state


def scheme_laplace_functional(spec: ModelSpec, epsilon: float, theta: float, t: float) -> float:
    """Exact ``E exp(-theta <1, X^eps_t>)`` of the binary scheme with constant coefficients.

    The particle count started from ``m / eps`` particles is a sum of
    independent birth-death families, each zero with probability ``1 - p``
    and otherwise geometric with ratio ``g``.
    """
    bd = BirthDeath(spec, epsilon)
    n0 = int(round(spec.initial.total_mass / epsilon))
    p, g = bd.survival(t), bd.geometric_ratio(t)
    s = math.exp(-theta * epsilon)
    pgf = (1.0 - p) + p * (1.0 - g) * s / (1.0 - g * s)
    return pgf ** n0
