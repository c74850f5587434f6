"""Run configuration for maninlab."""

import os
from fractions import Fraction
from pathlib import Path
from typing import Any, List, Optional, Union

import yaml
from pydantic import BaseModel, Field, field_validator
from sympy import isprime

OUTPUT_ENV_VAR = "MANINLAB_OUTPUT_PATH"
CATALOG_ENV_VAR = "MANINLAB_CATALOG_PATH"

DEFAULT_LAMBDA_GRID = ["0", "1/20", "1/10", "1/5", "1/3", "1/2", "1"]


def _env_output_path() -> Optional[Path]:
    env_value = os.getenv(OUTPUT_ENV_VAR)
    if not env_value:
        return None
    return Path(os.path.expanduser(env_value))


def resolve_output_path(explicit_path: Optional[Path] = None) -> Path:
    """Resolve the run output directory, honoring the env override when no path is given."""
    if explicit_path is not None:
        return explicit_path
    env_path = _env_output_path()
    if env_path is not None:
        return env_path
    return Path.home() / ".maninlab" / "runs"


class RunConfig(BaseModel):
    """Parameters shared by the counting, certification and cone commands."""

    surface: str = Field(
        default="sextic_a1",
        description="Catalog name or path to a surface YAML document",
    )

    q: int = Field(default=3, description="Prime size of the base field", ge=2)

    bound: int = Field(
        default=2,
        description="Anticanonical degree bound for counting",
        ge=0,
    )

    cap: int = Field(default=6, description="Truncation cap for series expansions", ge=1)

    lambda_grid: List[Fraction] = Field(
        default_factory=lambda: [Fraction(x) for x in DEFAULT_LAMBDA_GRID],
        description="Values of lambda at which cone coverage is evaluated",
    )

    gamma_depth: int = Field(
        default=6,
        description="Number of Euler factors multiplied out for the leading constant",
        ge=1,
    )

    out_dir: Path = Field(
        default_factory=resolve_output_path,
        description="Directory for run records and CSV reports",
    )

    max_terms: int = Field(
        default=200_000,
        description="Budget on enumerated divisor tuples and series terms",
        ge=1,
    )

    oracle_budget: int = Field(
        default=2_000_000,
        description="Budget on section tuples tried by the brute-force oracle",
        ge=1,
    )

    jobs: int = Field(default=1, description="Worker count for grid sweeps", ge=1)

    union_over_j0: bool = Field(
        default=True,
        description="Take the coverage region as a union over every choice of j0",
    )

    grid_max_variables: int = Field(
        default=4,
        description="Largest local series (in variables) certified on a full grid",
        ge=1,
    )

    seed: int = Field(default=0, description="Seed for sampled checks")

    model_config = {"arbitrary_types_allowed": True}

    @field_validator("q")
    @classmethod
    def _q_prime(cls, value: int) -> int:
        if not isprime(value):
            raise ValueError("q must be prime")
        return value

    @field_validator("lambda_grid", mode="before")
    @classmethod
    def _parse_lambda_grid(cls, value: Any) -> List[Fraction]:
        if isinstance(value, (str, int, float, Fraction)):
            value = [value]
        parsed = []
        for item in value:
            try:
                fraction = Fraction(str(item)) if not isinstance(item, Fraction) else item
            except (ValueError, ZeroDivisionError) as e:
                raise ValueError(f"invalid lambda value {item!r}") from e
            if fraction < 0:
                raise ValueError(f"lambda must be non-negative, got {item}")
            parsed.append(fraction)
        return sorted(set(parsed))

    @classmethod
    def from_yaml(cls, path: Union[str, Path]) -> "RunConfig":
        """Load configuration from a YAML file.

        Raises:
            FileNotFoundError: If the file does not exist
            ValueError: If the YAML is invalid
        """
        path = Path(path).expanduser()
        if not path.exists():
            raise FileNotFoundError(f"Config file not found: {path}")

        with open(path, "r", encoding="utf-8") as f:
            try:
                data = yaml.safe_load(f) or {}
            except yaml.YAMLError as e:
                raise ValueError(f"Invalid YAML in {path}: {e}") from e

        return cls._from_yaml_dict(data)

    @classmethod
    def _from_yaml_dict(cls, data: dict) -> "RunConfig":
        """Flatten the sectioned YAML layout into config fields."""
        config_dict: dict = {}

        if "surface" in data:
            config_dict["surface"] = str(data["surface"])

        field_section = data.get("field", {})
        if "q" in field_section:
            config_dict["q"] = field_section["q"]
        if "bound" in field_section:
            config_dict["bound"] = field_section["bound"]

        series = data.get("series", {})
        for key in ("cap", "gamma_depth", "grid_max_variables", "seed"):
            if key in series:
                config_dict[key] = series[key]

        cones = data.get("cones", {})
        if "lambda_grid" in cones:
            config_dict["lambda_grid"] = cones["lambda_grid"]
        if "union_over_j0" in cones:
            config_dict["union_over_j0"] = cones["union_over_j0"]

        output = data.get("output", {})
        if "out_dir" in output:
            config_dict["out_dir"] = Path(os.path.expanduser(output["out_dir"]))

        budget = data.get("budget", {})
        for key in ("max_terms", "oracle_budget", "jobs"):
            if key in budget:
                config_dict[key] = budget[key]

        return cls(**config_dict)

    @classmethod
    def load(cls, path: Optional[Union[str, Path]] = None) -> "RunConfig":
        """Load configuration from file or use defaults.

        Searches for config in order:
        1. Explicit path if provided
        2. ./maninlab.yaml
        3. ~/.maninlab/maninlab.yaml
        4. Default configuration
        """
        if path:
            return cls.from_yaml(path)

        for config_path in (Path("maninlab.yaml"), Path.home() / ".maninlab" / "maninlab.yaml"):
            if config_path.expanduser().exists():
                return cls.from_yaml(config_path)

        return cls()
