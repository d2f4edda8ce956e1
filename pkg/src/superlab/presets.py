"""Named model presets: inward OU, outward OU and the h-transformed OU."""

from __future__ import annotations

from typing import Sequence

from .fields import Field
from .model import Atom, BranchingMechanism, InitialMeasure, ModelSpec
from .spatial import MotionKind, SpatialMotion


def inward_ou(beta: float = 1.0, a: float = 1.0, b: float = 1.0, c: float = 1.0, d: int = 1,
              atoms: Sequence[tuple[float, float]] = (), x0=None, mass: float = 1.0) -> ModelSpec:
    """Super inward OU with constant branching coefficients."""
    mech = BranchingMechanism(a=Field.constant(a), b=Field.constant(b), beta=Field.constant(beta),
                              atoms=tuple(Atom(Field.constant(w), y) for w, y in atoms))
    x0 = [0.0] * d if x0 is None else x0
    return ModelSpec(SpatialMotion(MotionKind.INWARD, c, d), mech,
                     InitialMeasure.dirac(x0, mass), name="inward-ou")


def outward_ou(beta: float = 3.0, a: float = 1.0, b: float = 1.0, c: float = 1.0, d: int = 1,
               atoms: Sequence[tuple[float, float]] = (), x0=None, mass: float = 1.0) -> ModelSpec:
    """Super outward OU; supercritical when ``beta a > c d``."""
    mech = BranchingMechanism(a=Field.constant(a), b=Field.constant(b), beta=Field.constant(beta),
                              atoms=tuple(Atom(Field.constant(w), y) for w, y in atoms))
    x0 = [0.0] * d if x0 is None else x0
    return ModelSpec(SpatialMotion(MotionKind.OUTWARD, c, d), mech,
                     InitialMeasure.dirac(x0, mass), name="outward-ou")


def htransform_ou(c: float = 3.0, c1: float = 2.0, c2: float = 1.0, d: int = 1,
                  alpha_orig: Field | None = None, x0=None, mass: float = 1.0) -> ModelSpec:
    """The transformed process ``X^h`` of the variable-rate OU model.

    Observables ``f`` of the original process ``X = X^h / h`` are evaluated
    as ``f / h`` on ``X^h``; the transform data is kept in ``spec.htransform``.
    """
    from .spectral import htransform_build

    ht = htransform_build(c, c1, c2, d, alpha_orig)
    x0 = [0.0] * d if x0 is None else x0
    return ModelSpec(ht.transformed_motion, ht.transformed_branching,
                     InitialMeasure.dirac(x0, mass), name="htransform-ou", htransform=ht)


PRESETS = {
    "inward-ou": inward_ou,
    "outward-ou": outward_ou,
    "htransform-ou": htransform_ou,
}


def preset(name: str, **params) -> ModelSpec:
    try:
        return PRESETS[name](**params)
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None


def default_registry_models() -> list[ModelSpec]:
    return [inward_ou(beta=1.0), inward_ou(beta=0.5), outward_ou(), htransform_ou()]
