"""superlab: simulation and verification of supercritical superprocesses.

Deterministic oracles (mean semigroup, variance formula, resolvent,
h-transform, log-Laplace equation) live next to a mass-epsilon branching
particle simulator and the experiment layer that compares the two.
"""

from .fields import Field
from .model import (Atom, BranchingMechanism, Bounds, ConfigurationError, InitialMeasure,
                    ModelSpec, alpha_of, big_a_of, k_bound, psi_eval, validate_model)
from .presets import htransform_ou, inward_ou, outward_ou, preset
from .quadrature import QuadratureSpec
from .spatial import MotionKind, SpatialMotion
from .spectral import SpectralData, SpectralError, htransform_build, registry_lookup

__version__ = "0.1.0"
