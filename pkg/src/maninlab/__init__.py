"""maninlab - exact morphism counts from P^1 to Cox-presented surfaces over finite fields.

maninlab counts the morphisms of a given multidegree from the projective line
over F_q to a surface with an intrinsic linear Cox presentation. It splits each
count into a dominant term and two error sums, evaluates the predicted leading
constant, certifies the generating-series identities behind the error bounds,
and computes the cone volumes that govern which degrees are controlled.

Basic Usage:
    from maninlab import CurveContext, default_choice, resolve_surface
    from maninlab.core.count import hom_terms

    cox = resolve_surface("sextic_a1")
    terms = hom_terms(cox, default_choice(cox), (0, 0, 0, 0), CurveContext(3))
    assert terms.hom == terms.n0 + terms.n1 + terms.n2 == 2
"""

from maninlab.core import (
    BudgetExceeded,
    CoxPresentation,
    CurveContext,
    IdentityFailure,
    ManinLabError,
    SurfaceDataError,
    admissible_choices,
    check_hypothesis_44,
    default_choice,
    resolve_surface,
)
from maninlab.models import CertificationRecord, ConeRow, CountRecord, RunConfig

__version__ = "0.1.0"

__all__ = [
    "BudgetExceeded",
    "CoxPresentation",
    "CurveContext",
    "IdentityFailure",
    "ManinLabError",
    "SurfaceDataError",
    "admissible_choices",
    "check_hypothesis_44",
    "default_choice",
    "resolve_surface",
    "CertificationRecord",
    "ConeRow",
    "CountRecord",
    "RunConfig",
]
