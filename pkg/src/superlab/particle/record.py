"""Per-path trajectories of observables and of the martingale ``W_t``."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..model import ModelSpec
from .engines import check_epsilon, choose_engine, step_to
from .state import (CapacityError, SimConfig, functional, init_population, martingale_value,
                    path_rng)


@dataclass
class TrajectoryRecord:
    """Observations of one path at ``cfg.observation_times``.

    ``values[name]`` holds ``<f, X_t>`` per observation time.  A record cut
    short by a capacity error keeps the completed rows and sets
    ``complete = False``.
    """

    path_id: int
    times: list[float] = field(default_factory=list)
    values: dict[str, list[float]] = field(default_factory=dict)
    W: list[float] = field(default_factory=list)
    counts: list[int] = field(default_factory=list)
    extinct: list[bool] = field(default_factory=list)
    complete: bool = True
    t_reached: float = 0.0
    event_count: int = 0

    def append(self, t: float, vals: dict[str, float], w: float, n: int) -> None:
        self.times.append(t)
        for k, v in vals.items():
            self.values.setdefault(k, []).append(v)
        self.W.append(w)
        self.counts.append(n)
        self.extinct.append(n == 0)
        self.t_reached = t

    def value(self, name: str) -> np.ndarray:
        return np.asarray(self.values[name])

    @property
    def survived(self) -> bool:
        return bool(self.counts) and self.counts[-1] > 0

    def rows(self) -> list[tuple[int, float, str, float]]:
        """Long-format rows ``(path_id, t, observable_name, value)``."""
        out = []
        for i, t in enumerate(self.times):
            for k in self.values:
                out.append((self.path_id, t, k, self.values[k][i]))
            out.append((self.path_id, t, "W", self.W[i]))
            out.append((self.path_id, t, "particle_count", float(self.counts[i])))
            out.append((self.path_id, t, "extinct", float(self.extinct[i])))
        return out


def needs_positions(observables: Sequence, sd=None) -> bool:
    if sd is not None and not sd.phi0.is_constant:
        return True
    return any(f.constant_value() is None for f in observables)


def simulate_path(spec: ModelSpec, cfg: SimConfig, observables: Sequence, sd=None,
                  path_id: int = 0, raise_on_capacity: bool = True) -> TrajectoryRecord:
    """Run one path through the observation times; deterministic in ``(seed, path_id)``.

    ``sd`` (spectral data) enables the ``W_t`` column; without it ``W`` is NaN.
    """
    check_epsilon(spec, cfg)
    engine = choose_engine(spec, cfg)
    track = engine == "thinning" or needs_positions(observables, sd)
    state = init_population(spec.initial, cfg, path_rng(cfg.seed, path_id), track_positions=track)
    rec = TrajectoryRecord(path_id)
    try:
        for t in cfg.observation_times:
            step_to(state, t, spec, cfg)
            vals = {f.name: functional(state, f) for f in observables}
            w = martingale_value(state, sd) if sd is not None else float("nan")
            rec.append(t, vals, w, state.n)
    except CapacityError as exc:
        rec.complete = False
        rec.t_reached = exc.time_reached if exc.time_reached is not None else rec.t_reached
        rec.event_count = state.event_count
        exc.record = rec
        if raise_on_capacity:
            raise
        return rec
    rec.event_count = state.event_count
    return rec
