"""Mass-epsilon branching particle approximation of the superprocess."""

from .engines import BirthDeath, check_epsilon, choose_engine, spawn_sizes, step_to
from .record import TrajectoryRecord, simulate_path
from .state import (RNG_ID, CapacityError, Particle, PopulationState, SimConfig, functional,
                    init_population, martingale_value, path_rng)

__all__ = ["BirthDeath", "CapacityError", "Particle", "PopulationState", "RNG_ID", "SimConfig",
           "TrajectoryRecord", "check_epsilon", "choose_engine", "functional", "init_population",
           "martingale_value", "path_rng", "simulate_path", "spawn_sizes", "step_to"]
