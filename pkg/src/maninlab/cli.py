"""maninlab CLI - counting, certification and cone tables for Cox-presented surfaces."""

import argparse
import logging
import math
import sys
from fractions import Fraction
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence

from dotenv import load_dotenv
from pydantic import BaseModel, ValidationError
from rich.console import Console
from rich.logging import RichHandler
from rich.markup import escape
from rich.table import Table

from maninlab import __version__
from maninlab.catalog import catalog_names
from maninlab.core import cones, count, genfun
from maninlab.core.errors import BudgetExceeded, IdentityFailure, SurfaceDataError
from maninlab.core.ff1 import CurveContext
from maninlab.core.surface import (
    CoxPresentation,
    admissible_choices,
    anticanonical,
    check_hypothesis_44,
    default_choice,
    kx_divisibility,
    resolve_surface,
)
from maninlab.models.config import RunConfig
from maninlab.models.records import (
    CERTIFICATION_COLUMNS,
    CONE_COLUMNS,
    COUNT_COLUMNS,
    GAMMA_COLUMNS,
    SUMMARY_COLUMNS,
    CertificationRecord,
    GammaRow,
    format_fraction,
)
from maninlab.storage import store_run, write_csv

logger = logging.getLogger("maninlab")

console = Console()

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_INPUT = 2
EXIT_BUDGET = 3

EULER_FACTOR_NORMS = (2, 3, 4, 5, 8, 9)

CONFIG_TEMPLATE = """\
# maninlab Configuration
# ======================
# Flags given on the command line override the values below.

# Surface
# -------
# A catalog name (sextic_a1, toy_transversal) or a path to a surface YAML document.
surface: sextic_a1

# Base field and counting range
# -----------------------------
field:
  q: 3                 # prime size of the base field
  bound: 2             # count every y with <y, -K> <= bound

# Series
# ------
series:
  cap: 6               # truncation cap of the local series
  gamma_depth: 6       # closed-point degree B of the partial Euler product
  grid_max_variables: 4
  seed: 0

# Cones
# -----
cones:
  lambda_grid: ["0", "1/20", "1/10", "1/5", "1/3", "1/2", "1"]
  union_over_j0: true

# Output
# ------
output:
  out_dir: ~/.maninlab/runs

# Budgets
# -------
# Runs that exceed a budget write what they have and exit with status 3.
budget:
  max_terms: 200000
  oracle_budget: 2000000
  jobs: 1
"""

ENV_TEMPLATE = """\
# maninlab Environment Configuration
# ==================================

# Directory for run records (JSON lines, organized by date)
# MANINLAB_OUTPUT_PATH=~/.maninlab/runs

# Extra directory of surface YAML documents, searched after the built-in catalog
# MANINLAB_CATALOG_PATH=~/.maninlab/surfaces
"""


# Configuration


def _overrides(args: argparse.Namespace) -> Dict[str, Any]:
    mapping = {
        "surface": "surface",
        "q": "q",
        "bound": "bound",
        "cap": "cap",
        "lambda_grid": "lambda_grid",
        "jobs": "jobs",
        "depth": "gamma_depth",
        "seed": "seed",
    }
    values = {}
    for arg_name, field_name in mapping.items():
        value = getattr(args, arg_name, None)
        if value is not None:
            values[field_name] = value
    if getattr(args, "fixed_j0", False):
        values["union_over_j0"] = False
    return values


def load_config(args: argparse.Namespace) -> RunConfig:
    """The config file (or defaults) with the command-line flags applied on top."""
    config = RunConfig.load(getattr(args, "config", None))
    overrides = _overrides(args)
    if not overrides:
        return config
    return RunConfig(**{**config.model_dump(), **overrides})


def _surface(config: RunConfig):
    cox = resolve_surface(config.surface)
    choice = default_choice(cox)
    if choice is None:
        raise SurfaceDataError(f"surface {cox.name} has no admissible choice of J", path="relation")
    return cox, choice


def _write_outputs(
    args: argparse.Namespace,
    config: RunConfig,
    kind: str,
    rows: Sequence[BaseModel],
    columns: Sequence[str],
) -> None:
    if args.out:
        path = write_csv(rows, columns, Path(args.out))
        console.print(f"Wrote {path}")
    if rows and not args.no_store:
        store_run(list(rows), kind, config.out_dir)


def _coords(cls) -> str:
    return "(" + ",".join(str(c) for c in cls.coords) + ")"


# Commands


def cmd_validate(args: argparse.Namespace) -> int:
    """Load a surface and report its invariants and the incidence hypothesis."""
    config = load_config(args)
    cox = resolve_surface(config.surface)

    table = Table(title=f"Surface {cox.name}")
    table.add_column("Invariant")
    table.add_column("Value")
    table.add_row("Picard rank", str(cox.picard_rank))
    table.add_row("dim X", str(cox.dim))
    table.add_row("generators", ", ".join(cox.labels))
    table.add_row("-K", _coords(anticanonical(cox)))
    table.add_row("delta", str(kx_divisibility(cox)))
    table.add_row("max face size", str(cox.max_face_size))
    for q in (2, 3, 5):
        table.add_row(f"#X(F_{q})", str(count.surface_point_count(cox, q)))
    console.print(table)

    choices = admissible_choices(cox)
    if not choices:
        console.print("[red]no admissible choice of J[/red]")
        return EXIT_FAILED
    choice_table = Table(title="Admissible choices")
    choice_table.add_column("J")
    choice_table.add_column("incidence hypothesis")
    for choice in choices:
        report = check_hypothesis_44(cox, choice)
        choice_table.add_row(choice.describe(cox), escape(report.summary()))
    console.print(choice_table)

    verdict = check_hypothesis_44(cox)
    console.print(escape(verdict.summary()))
    return EXIT_OK if verdict.holds else EXIT_FAILED


def cmd_count(args: argparse.Namespace) -> int:
    """Count morphisms of every multidegree up to the bound and compare with the main term."""
    config = load_config(args)
    cox, choice = _surface(config)
    ctx = CurveContext(config.q)
    report = count.manin_report(
        cox,
        ctx,
        config.bound,
        choice=choice,
        gamma_depth=config.gamma_depth,
        max_terms=config.max_terms,
        oracle=args.oracle,
        oracle_budget=config.oracle_budget,
        jobs=config.jobs,
    )

    table = Table(title=f"Morphisms to {cox.name} over F_{ctx.q}")
    for column in COUNT_COLUMNS:
        table.add_column(column, justify="right")
    for record in report.records:
        table.add_row(*(str(v) for v in record.csv_row()))
    console.print(table)

    summary = Table(title="Per-degree totals")
    for column in SUMMARY_COLUMNS:
        summary.add_column(column, justify="right")
    for row in report.summaries:
        summary.add_row(*(str(v) for v in row.csv_row()))
    console.print(summary)

    _write_outputs(args, config, "count", report.records, COUNT_COLUMNS)
    if args.out:
        out = Path(args.out)
        write_csv(report.summaries, SUMMARY_COLUMNS, out.with_name(f"{out.stem}_summary.csv"))

    if report.truncated:
        logger.warning("Budget exhausted; the tables above are partial")
        return EXIT_BUDGET
    return EXIT_OK


def _check_record(instance: str, prop: str, check: Callable[[], str]) -> CertificationRecord:
    try:
        witness = check()
    except IdentityFailure as e:
        return CertificationRecord(instance=instance, property=prop, status="fail", witness=str(e))
    return CertificationRecord(instance=instance, property=prop, status="pass", witness=witness)


def _euler_factor_records(cox: CoxPresentation, choice) -> List[CertificationRecord]:
    records = []
    for qv in EULER_FACTOR_NORMS:

        def check(qv: int = qv) -> str:
            return format_fraction(count.check_euler_factor(cox, choice, qv))

        records.append(_check_record(f"{cox.name} q_v={qv}", "euler_factor", check))
    return records


def cmd_certify(args: argparse.Namespace) -> int:
    """Certify the generating-series identities and, optionally, the section-count bounds."""
    config = load_config(args)
    cox, choice = _surface(config)

    records = genfun.verify_series_grid(
        max_variables=config.grid_max_variables, max_terms=config.max_terms, jobs=config.jobs
    )
    records += genfun.verify_local_series(
        cox, choice, config.cap, seed=config.seed, max_terms=config.max_terms
    )
    records += _euler_factor_records(cox, choice)
    if args.sections:
        records += count.section_bounds_report(cox, choice, seed=config.seed)

    failed = [r for r in records if r.status == "fail"]
    skipped = [r for r in records if r.status == "skip"]

    table = Table(title=f"Certification of {cox.name}")
    for column in CERTIFICATION_COLUMNS:
        table.add_column(column)
    shown = records if args.all else failed + skipped
    for record in shown:
        table.add_row(*(escape(str(v)) for v in record.csv_row()))
    if shown:
        console.print(table)
    console.print(
        f"{len(records) - len(failed) - len(skipped)} passed, "
        f"{len(failed)} failed, {len(skipped)} skipped"
    )

    _write_outputs(args, config, "certify", records, CERTIFICATION_COLUMNS)
    if failed:
        return EXIT_FAILED
    if skipped:
        return EXIT_BUDGET
    return EXIT_OK


def cmd_cones(args: argparse.Namespace) -> int:
    """Exact cone volumes and coverage ratios over the lambda grid."""
    config = load_config(args)
    cox = resolve_surface(config.surface)
    rows = cones.cone_rows(
        cox, config.lambda_grid, method=args.method, union_over_j0=config.union_over_j0
    )
    alpha = cones.section_volume(cox)

    table = Table(title=f"Coverage of the anticanonical section of {cox.name}")
    for column in CONE_COLUMNS:
        table.add_column(column, justify="right")
    for row in rows:
        table.add_row(*(str(v) for v in row.csv_row()))
    console.print(table)
    console.print(f"alpha = {format_fraction(alpha)}")
    console.print(f"sup ratio = {format_fraction(max(row.ratio for row in rows))}")

    if args.samples:
        estimate = cones.monte_carlo_volume(
            cones.dual_cone_section(cox), samples=args.samples, seed=config.seed
        )
        console.print(f"Monte-Carlo alpha = {estimate:.6g} ({args.samples} samples)")

    _write_outputs(args, config, "cones", rows, CONE_COLUMNS)
    return EXIT_OK


def cmd_gamma(args: argparse.Namespace) -> int:
    """Partial Euler products of the leading constant against the sum of c_princ."""
    config = load_config(args)
    cox, choice = _surface(config)
    q = config.q

    rows = []
    worst_gap = 0.0
    for estimate in count.gamma_table(cox, q, config.gamma_depth):
        direct = count.c_princ_total(cox, choice, q, estimate.depth)
        rows.append(
            GammaRow(
                surface=cox.name,
                q=q,
                depth=estimate.depth,
                gamma=estimate.value,
                tail_bound=estimate.tail_bound,
                c_princ_sum=direct,
            )
        )
        gap = abs(direct / estimate.value - 1)
        worst_gap = max(worst_gap, gap)
        if gap > 1e-9:
            raise IdentityFailure(
                f"c_princ sum {direct} differs from gamma {estimate.value} at depth "
                f"{estimate.depth}",
                witness=estimate.depth,
            )

    table = Table(title=f"gamma({cox.name}) over F_{q}")
    for column in GAMMA_COLUMNS:
        table.add_column(column, justify="right")
    for row in rows:
        table.add_row(*(str(v) for v in row.csv_row()))
    console.print(table)

    last = rows[-1]
    if math.isfinite(last.tail_bound):
        low = last.gamma / (1 + last.tail_bound)
        high = last.gamma * (1 + last.tail_bound)
        console.print(f"{low:.12g} <= gamma <= {high:.12g} (relative gap {worst_gap:.2g})")
    else:
        console.print("[yellow]no tail bound: the local density has a linear term[/yellow]")

    _write_outputs(args, config, "gamma", rows, GAMMA_COLUMNS)
    return EXIT_OK


def cmd_init(args: argparse.Namespace) -> int:
    """Initialize maninlab configuration files in a directory."""
    target_dir = Path(args.directory).resolve()

    if not target_dir.exists():
        console.print(f"Error: Directory does not exist: {target_dir}")
        return EXIT_INPUT

    files_created = []
    files_skipped = []
    for name, template in (("maninlab.yaml", CONFIG_TEMPLATE), (".env.maninlab", ENV_TEMPLATE)):
        path = target_dir / name
        if path.exists() and not args.force:
            files_skipped.append(name)
        else:
            path.write_text(template, encoding="utf-8")
            files_created.append(name)

    if files_created:
        console.print("Created:")
        for name in files_created:
            console.print(f"  - {name}")
    if files_skipped:
        console.print("Skipped (already exists, use --force to overwrite):")
        for name in files_skipped:
            console.print(f"  - {name}")

    console.print()
    console.print("Next steps:")
    console.print("  1. Edit maninlab.yaml to pick the surface, field and budgets")
    console.print("  2. maninlab validate")
    console.print("  3. maninlab count --out counts.csv")
    console.print()
    console.print(f"Catalog surfaces: {', '.join(catalog_names())}")
    return EXIT_OK


def cmd_version(args: argparse.Namespace) -> int:
    console.print(f"maninlab {__version__}")
    return EXIT_OK


# Parser


def _add_common(parser: argparse.ArgumentParser, *flags: str) -> None:
    parser.add_argument("--config", help="Path to maninlab.yaml")
    parser.add_argument("--surface", help="Catalog name or path to a surface document")
    if "q" in flags:
        parser.add_argument("--q", type=int, help="Prime size of the base field")
    if "jobs" in flags:
        parser.add_argument("--jobs", type=int, help="Worker processes")
    if "seed" in flags:
        parser.add_argument("--seed", type=int, help="Seed for sampled checks")
    if "out" in flags:
        parser.add_argument("--out", help="Write the result table to this CSV file")
        parser.add_argument(
            "--no-store", action="store_true", help="Do not keep a JSON-lines record of the run"
        )


def _lambda_grid(text: str) -> List[Fraction]:
    try:
        return [Fraction(item.strip()) for item in text.split(",") if item.strip()]
    except (ValueError, ZeroDivisionError) as e:
        raise argparse.ArgumentTypeError(f"invalid lambda grid {text!r}") from e


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="maninlab",
        description="Exact morphism counts and Manin-type checks for surfaces over F_q(t)",
    )
    parser.add_argument(
        "--log-level",
        default="WARNING",
        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
        help="Logging level (default: WARNING)",
    )
    subparsers = parser.add_subparsers(dest="command", help="Available commands")

    validate_parser = subparsers.add_parser("validate", help="Check a surface presentation")
    _add_common(validate_parser)
    validate_parser.set_defaults(func=cmd_validate)

    count_parser = subparsers.add_parser("count", help="Count morphisms up to a degree bound")
    _add_common(count_parser, "q", "jobs", "out")
    count_parser.add_argument("--bound", type=int, help="Anticanonical degree bound")
    count_parser.add_argument("--depth", type=int, help="Euler product depth for gamma")
    count_parser.add_argument(
        "--oracle", action="store_true", help="Cross-check every count by torsor enumeration"
    )
    count_parser.set_defaults(func=cmd_count)

    certify_parser = subparsers.add_parser("certify", help="Certify the series identities")
    _add_common(certify_parser, "jobs", "seed", "out")
    certify_parser.add_argument("--cap", type=int, help="Truncation cap of the local series")
    certify_parser.add_argument(
        "--sections", action="store_true", help="Also run the random section-count suite"
    )
    certify_parser.add_argument("--all", action="store_true", help="List passing checks too")
    certify_parser.set_defaults(func=cmd_certify)

    cones_parser = subparsers.add_parser("cones", help="Cone volumes and coverage ratios")
    _add_common(cones_parser, "seed", "out")
    cones_parser.add_argument(
        "--lambda-grid", type=_lambda_grid, help="Comma-separated values, e.g. 0,1/10,1/2"
    )
    cones_parser.add_argument(
        "--method", default="complement", choices=list(cones.UNION_METHODS)
    )
    cones_parser.add_argument(
        "--fixed-j0", action="store_true", help="Use j0 = 0 only instead of the union over j0"
    )
    cones_parser.add_argument(
        "--samples", type=int, default=0, help="Also estimate alpha by Monte-Carlo"
    )
    cones_parser.set_defaults(func=cmd_cones)

    gamma_parser = subparsers.add_parser("gamma", help="Partial products of the constant")
    _add_common(gamma_parser, "q", "out")
    gamma_parser.add_argument("--depth", type=int, help="Largest closed-point degree")
    gamma_parser.set_defaults(func=cmd_gamma)

    init_parser = subparsers.add_parser("init", help="Write maninlab.yaml and .env.maninlab")
    init_parser.add_argument(
        "-d", "--directory", default=".", help="Target directory (default: current directory)"
    )
    init_parser.add_argument(
        "-f", "--force", action="store_true", help="Overwrite existing files"
    )
    init_parser.set_defaults(func=cmd_init)

    version_parser = subparsers.add_parser("version", help="Show version information")
    version_parser.set_defaults(func=cmd_version)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    logging.basicConfig(
        level=args.log_level,
        format="%(message)s",
        handlers=[RichHandler(console=Console(stderr=True), show_path=False)],
        force=True,
    )
    load_dotenv(".env.maninlab")

    if args.command is None:
        parser.print_help()
        return EXIT_OK

    try:
        return args.func(args)
    except IdentityFailure as e:
        console.print(f"[red]Check failed:[/red] {escape(str(e))}")
        return EXIT_FAILED
    except BudgetExceeded as e:
        console.print(f"[yellow]Budget exceeded:[/yellow] {escape(str(e))}")
        return EXIT_BUDGET
    except (SurfaceDataError, ValidationError, FileNotFoundError, KeyError, ValueError) as e:
        console.print(f"[red]Error:[/red] {escape(str(e))}")
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
