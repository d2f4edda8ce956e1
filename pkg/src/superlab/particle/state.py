"""Population state, simulation settings and per-path random streams."""

from __future__ import annotations

from dataclasses import dataclass, field
import math
from typing import NamedTuple, Sequence

import numpy as np

from ..model import ConfigurationError, InitialMeasure

RNG_ID = "numpy.random.Philox(SeedSequence([seed, path_id]))"


class CapacityError(RuntimeError):
    """The population outgrew ``max_particles``; carries the partial state."""

    def __init__(self, message: str, state: "PopulationState | None" = None,
                 record=None):
        super().__init__(message)
        self.state = state
        self.record = record

    @property
    def time_reached(self) -> float | None:
        return None if self.state is None else self.state.time


ENGINES = ("auto", "thinning", "genealogy")


@dataclass(frozen=True)
class SimConfig:
    """Particle-scheme settings.

    ``engine`` selects the event scheme: ``"thinning"`` is the generic
    per-event scheme, ``"genealogy"`` samples the same law in closed form for
    spatially homogeneous binary mechanisms, ``"auto"`` picks the latter
    whenever it applies.
    """

    epsilon: float
    max_particles: int = 10_000_000
    seed: int = 0
    observation_times: tuple[float, ...] = (1.0,)
    engine: str = "auto"

    def __post_init__(self):
        object.__setattr__(self, "observation_times", tuple(float(t) for t in self.observation_times))
        if not self.epsilon > 0:
            raise ConfigurationError("epsilon must be positive")
        if self.max_particles < 1:
            raise ConfigurationError("max_particles must be positive")
        ts = self.observation_times
        if any(t < 0 for t in ts) or any(b <= a for a, b in zip(ts, ts[1:])):
            raise ConfigurationError("observation times must be nonnegative and strictly increasing")
        if self.engine not in ENGINES:
            raise ConfigurationError(f"engine must be one of {ENGINES}")
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigurationError("seed must be a 64-bit unsigned integer")


def path_rng(seed: int, path_id: int) -> np.random.Generator:
    """Independent counter-based stream keyed by ``(seed, path_id)``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(path_id)])))


class Particle(NamedTuple):
    position: tuple[float, ...]
    mass: float


@dataclass
class PopulationState:
    """Empirical measure ``sum_i eps delta_{x_i}`` at ``time``.

    ``positions`` is ``None`` in count-only mode (every observable constant),
    where only the particle count ``n`` is tracked.
    """

    time: float
    n: int
    epsilon: float
    d: int
    positions: np.ndarray | None
    rng: np.random.Generator
    event_count: int = 0

    @property
    def total_mass(self) -> float:
        return self.epsilon * self.n

    @property
    def tracks_positions(self) -> bool:
        return self.positions is not None

    @property
    def particles(self) -> list[Particle]:
        if self.positions is None:
            raise ValueError("positions are not tracked in count-only mode")
        return [Particle(tuple(p), self.epsilon) for p in self.positions[: self.n]]

    def copy(self) -> "PopulationState":
        pos = None if self.positions is None else self.positions[: self.n].copy()
        return PopulationState(self.time, self.n, self.epsilon, self.d, pos, self.rng, self.event_count)


def particle_counts(mu: InitialMeasure, epsilon: float) -> np.ndarray:
    """Atom masses as particle counts; masses must be multiples of ``epsilon``."""
    ratio = mu.masses() / epsilon
    counts = np.rint(ratio)
    bad = np.abs(counts * epsilon - mu.masses()) > 1e-12
    if np.any(bad) or np.any(counts < 1):
        m = float(mu.masses()[np.argmax(bad)] if np.any(bad) else mu.masses().min())
        raise ConfigurationError(f"atom mass {m:g} is not a positive multiple of epsilon = {epsilon:g}")
    return counts.astype(np.int64)


def init_population(mu: InitialMeasure, cfg: SimConfig, rng: np.random.Generator | None = None,
                    track_positions: bool = True, path_id: int = 0) -> PopulationState:
    """Each atom ``(x, m)`` becomes ``m / eps`` particles at ``x``."""
    counts = particle_counts(mu, cfg.epsilon)
    n = int(counts.sum())
    if n > cfg.max_particles:
        raise CapacityError(f"initial population of {n} particles exceeds max_particles = {cfg.max_particles}")
    rng = rng if rng is not None else path_rng(cfg.seed, path_id)
    pos = np.repeat(mu.positions(), counts, axis=0) if track_positions else None
    return PopulationState(0.0, n, cfg.epsilon, mu.dim, pos, rng)


def functional(state: PopulationState, f) -> float:
    """``<f, X_t> = eps sum_i f(x_i)``."""
    if state.n == 0:
        return 0.0
    cv = f.constant_value()
    if cv is not None:
        return state.epsilon * state.n * cv
    if state.positions is None:
        raise ValueError(f"observable {f.name} needs positions, but the state is count-only")
    return float(state.epsilon * np.sum(f(state.positions[: state.n])))


def martingale_value(state: PopulationState, sd) -> float:
    """``W_t = exp(-lambda0 t) <phi0, X_t>``."""
    if state.n == 0:
        return 0.0
    if sd.phi0.is_constant:
        s = state.epsilon * state.n * sd.phi0.constant_value()
    elif state.positions is None:
        raise ValueError("phi0 is not constant, but the state is count-only")
    else:
        s = float(state.epsilon * np.sum(sd.phi0(state.positions[: state.n])))
    return math.exp(-sd.lambda0 * state.time) * s
