"""Schema of a surface document (one YAML file per surface)."""

from typing import List, Optional

from pydantic import BaseModel, Field, field_validator


class GeneratorEntry(BaseModel):
    """One Cox ring generator and its class in the Picard lattice."""

    label: str = Field(min_length=1, description="Generator name, unique per surface")
    class_: List[int] = Field(alias="class", description="Coordinates in the Picard basis")

    model_config = {"populate_by_name": True}


class FactorEntry(BaseModel):
    """A variable of a relation monomial with its exponent b_{i,j}."""

    label: str
    exponent: int = Field(description="Exponent b_{i,j}, at least 1")

    @field_validator("exponent")
    @classmethod
    def _exponent_positive(cls, value: int) -> int:
        if value < 1:
            raise ValueError("exponent must be ≥ 1")
        return value


class RelationEntry(BaseModel):
    """One monomial s_j * prod s_i^{b_{i,j}} of the Cox relation."""

    linear: str = Field(description="Label of the variable entering linearly")
    factors: List[FactorEntry] = Field(min_length=1)


class SurfaceDocument(BaseModel):
    """Raw surface data as read from YAML, before invariant checks."""

    name: str
    description: Optional[str] = None
    picard_rank: int = Field(ge=1)
    basis_labels: List[str]
    generators: List[GeneratorEntry] = Field(min_length=1)
    relation: List[RelationEntry] = Field(min_length=1)
    incidence_maximal: List[List[str]] = Field(default_factory=list)
    effective_cone: List[List[int]] = Field(min_length=1)

    model_config = {
        "json_schema_extra": {
            "examples": [
                {
                    "name": "toy",
                    "picard_rank": 1,
                    "basis_labels": ["h"],
                    "generators": [
                        {"label": "x", "class": [1]},
                        {"label": "y", "class": [1]},
                    ],
                    "relation": [{"linear": "x", "factors": [{"label": "y", "exponent": 1}]}],
                    "incidence_maximal": [["x"], ["y"]],
                    "effective_cone": [[1]],
                }
            ]
        }
    }
