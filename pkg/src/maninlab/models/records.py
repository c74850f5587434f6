"""Result records emitted by the counting, certification, cone and constant runs."""

from fractions import Fraction
from typing import Any, List, Optional

from pydantic import BaseModel, Field, field_serializer


def format_fraction(value: Fraction) -> str:
    """Serialise a rational as "p/q" (or "p" when integral)."""
    value = Fraction(value)
    if value.denominator == 1:
        return str(value.numerator)
    return f"{value.numerator}/{value.denominator}"


class CountRecord(BaseModel):
    """Morphism count for one multidegree y and its dominant/error decomposition.

    ``d`` is the anticanonical degree <y, -K>. ``hom`` always equals
    ``n0 + n1 + n2``.
    """

    surface: str
    q: int
    y: List[int] = Field(description="Multidegree in the dual basis of the Picard basis")
    d: int = Field(description="Anticanonical degree <y, -K>")
    hom: int = Field(description="Number of morphisms of multidegree y")
    n0: int
    n1: int
    n2: int
    predicted: Optional[float] = Field(
        default=None, description="gamma(X) * q^<y,-K>, the per-y main term"
    )
    oracle: Optional[int] = Field(default=None, description="Brute-force torsor count")

    @property
    def y_label(self) -> str:
        return "(" + ",".join(str(c) for c in self.y) + ")"

    def csv_row(self) -> List[Any]:
        return [
            self.y_label,
            self.d,
            self.hom,
            self.n0,
            self.n1,
            self.n2,
            "" if self.predicted is None else f"{self.predicted:.6g}",
            "" if self.oracle is None else self.oracle,
        ]

    model_config = {
        "json_schema_extra": {
            "examples": [
                {
                    "surface": "sextic_a1",
                    "q": 3,
                    "y": [0, 0, 0, 0],
                    "d": 0,
                    "hom": 2,
                    "n0": 9,
                    "n1": -7,
                    "n2": 0,
                    "predicted": None,
                    "oracle": 2,
                }
            ]
        }
    }


COUNT_COLUMNS = ["y", "d", "hom", "n0", "n1", "n2", "predicted", "oracle"]


class DegreeSummary(BaseModel):
    """Aggregate of the counts of one anticanonical degree against the main term."""

    surface: str
    q: int
    d: int
    total: int
    predicted: float = Field(description="alpha * gamma * d^(rho-1) * q^(delta d)")
    ratio: Optional[float] = None
    tail_bound: float = Field(description="Relative error bound carried by gamma")
    truncated: bool = False

    def csv_row(self) -> List[Any]:
        return [
            self.d,
            self.total,
            f"{self.predicted:.6g}",
            "" if self.ratio is None else f"{self.ratio:.6g}",
            f"{self.tail_bound:.3g}",
            int(self.truncated),
        ]


SUMMARY_COLUMNS = ["d", "total", "predicted", "ratio", "tail_bound", "truncated"]


class CertificationRecord(BaseModel):
    """Outcome of one exact identity or bound check."""

    instance: str = Field(description="Instance key, e.g. 'a=(1,1) nu=(0,0)'")
    property: str = Field(description="Name of the checked property")
    status: str = Field(description="pass, fail or skip")
    witness: Optional[str] = Field(
        default=None, description="First differing monomial or the witnessing eta"
    )

    def csv_row(self) -> List[Any]:
        return [self.instance, self.property, self.status, self.witness or ""]


CERTIFICATION_COLUMNS = ["instance", "property", "status", "witness"]


class ConeRow(BaseModel):
    """Coverage of the anticanonical section by the region at one lambda."""

    surface: str
    lam: Fraction
    vol_full: Fraction
    vol_covered: Fraction
    ratio: Fraction

    model_config = {"arbitrary_types_allowed": True}

    @field_serializer("lam", "vol_full", "vol_covered", "ratio")
    def _fraction_text(self, value: Fraction) -> str:
        return format_fraction(value)

    def csv_row(self) -> List[Any]:
        return [
            self.surface,
            format_fraction(self.lam),
            format_fraction(self.vol_full),
            format_fraction(self.vol_covered),
            format_fraction(self.ratio),
        ]


CONE_COLUMNS = ["surface", "lambda", "vol_full", "vol_covered", "ratio"]


class GammaRow(BaseModel):
    """Partial Euler product for the leading constant up to closed-point degree B."""

    surface: str
    q: int
    depth: int
    gamma: float
    tail_bound: float = Field(description="Relative bound on the omitted factors")
    c_princ_sum: Optional[float] = Field(
        default=None, description="Sum over G of c_princ(G) at the same depth"
    )

    def csv_row(self) -> List[Any]:
        return [
            self.depth,
            f"{self.gamma:.12g}",
            f"{self.tail_bound:.3g}",
            "" if self.c_princ_sum is None else f"{self.c_princ_sum:.12g}",
        ]


GAMMA_COLUMNS = ["depth", "gamma", "tail_bound", "c_princ_sum"]
