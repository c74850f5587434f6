"""Storage and persistence for maninlab runs."""

from maninlab.storage.report_store import list_runs, load_run, store_run, write_csv

__all__ = ["write_csv", "store_run", "list_runs", "load_run"]
