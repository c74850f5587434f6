"""Core maninlab components."""

from maninlab.core.errors import BudgetExceeded, IdentityFailure, ManinLabError, SurfaceDataError
from maninlab.core.ff1 import CurveContext
from maninlab.core.surface import (
    CoxPresentation,
    admissible_choices,
    check_hypothesis_44,
    default_choice,
    resolve_surface,
)

__all__ = [
    "BudgetExceeded",
    "IdentityFailure",
    "ManinLabError",
    "SurfaceDataError",
    "CurveContext",
    "CoxPresentation",
    "admissible_choices",
    "check_hypothesis_44",
    "default_choice",
    "resolve_surface",
]
