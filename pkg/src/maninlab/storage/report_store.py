"""Run persistence - CSV tables and JSON-lines record files."""

import csv
import logging
from datetime import date, datetime
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Type, TypeVar

from pydantic import BaseModel, ValidationError

from maninlab.models.config import resolve_output_path

logger = logging.getLogger(__name__)

RecordT = TypeVar("RecordT", bound=BaseModel)


def write_csv(rows: Iterable[BaseModel], columns: Sequence[str], path: Path) -> Path:
    """Write records to a CSV file through their ``csv_row`` method.

    No timestamps are written, so identical runs give identical files.

    Args:
        rows: Records exposing ``csv_row()``
        columns: Header line, matching the order of ``csv_row()``
        path: Target file; parent directories are created

    Returns:
        The path written
    """
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow(row.csv_row())
    return path


def store_run(
    records: Sequence[BaseModel],
    kind: str,
    out_dir: Optional[Path] = None,
    when: Optional[datetime] = None,
) -> Path:
    """Save the records of one run as JSON lines.

    Runs are organized by date: ~/.maninlab/runs/2026-01-23/153422_count.jsonl

    Args:
        records: Records of the run, one JSON object per line
        kind: Run kind (count, certify, cones, gamma)
        out_dir: Base directory; the configured output path when omitted
        when: Timestamp of the run, now by default

    Returns:
        Path to the created file
    """
    out_dir = resolve_output_path(out_dir)
    when = when or datetime.now()

    date_dir = out_dir / when.strftime("%Y-%m-%d")
    date_dir.mkdir(parents=True, exist_ok=True)

    filepath = date_dir / f"{when.strftime('%H%M%S')}_{kind}.jsonl"
    with open(filepath, "w", encoding="utf-8") as f:
        for record in records:
            f.write(record.model_dump_json())
            f.write("\n")

    logger.info("Stored %s %s records in %s", len(records), kind, filepath)
    return filepath


def list_runs(
    out_dir: Optional[Path] = None,
    kind: Optional[str] = None,
    start_date: Optional[date] = None,
    end_date: Optional[date] = None,
) -> List[Path]:
    """Run files, newest first, optionally filtered by kind and date range."""
    out_dir = resolve_output_path(out_dir)
    if not out_dir.exists():
        return []

    runs = []
    for date_dir in sorted(out_dir.iterdir(), reverse=True):
        if not date_dir.is_dir():
            continue

        try:
            dir_date = datetime.strptime(date_dir.name, "%Y-%m-%d").date()
        except ValueError:
            # Not a run directory
            continue
        if start_date and dir_date < start_date:
            continue
        if end_date and dir_date > end_date:
            continue

        pattern = f"*_{kind}.jsonl" if kind else "*.jsonl"
        runs.extend(sorted(date_dir.glob(pattern), reverse=True))

    return runs


def load_run(path: Path, model: Type[RecordT]) -> List[RecordT]:
    """Read back the records of one run file; unparsable lines are skipped with a warning."""
    records = []
    with open(path, "r", encoding="utf-8") as f:
        for number, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                records.append(model.model_validate_json(line))
            except ValidationError as e:
                logger.warning("Skipping line %s of %s: %s", number, path, e)
    return records
