"""Verification toolkit for second-order Poincare-Sobolev, Rellich and Adams
inequalities on hyperbolic space."""

from .errors import (
    ConstraintError,
    ConvergenceError,
    DomainError,
    ExtrapolationError,
    HypergapError,
    IntegrabilityError,
    NotVanishingError,
)
from .hypgeo import (
    GeometryContext,
    ball_volume,
    phi,
    phi_inverse,
    phi_lower_bound_residual,
    unit_ball_volume,
)

__version__ = "0.1.0"

__all__ = [
    "ConstraintError", "ConvergenceError", "DomainError", "ExtrapolationError", "HypergapError",
    "IntegrabilityError", "NotVanishingError", "GeometryContext", "ball_volume", "phi",
    "phi_inverse", "phi_lower_bound_residual", "unit_ball_volume",
]
