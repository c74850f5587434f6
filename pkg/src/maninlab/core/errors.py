"""Exception types shared by the maninlab library."""

from typing import Any, Optional


class ManinLabError(Exception):
    """Base class for every error raised by maninlab."""


class SurfaceDataError(ManinLabError, ValueError):
    """A surface document violates the schema or a presentation invariant."""

    def __init__(self, message: str, path: Optional[str] = None):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class BudgetExceeded(ManinLabError):
    """An enumeration would exceed its configured budget."""

    def __init__(self, what: str, needed: int, limit: int):
        self.what = what
        self.needed = needed
        self.limit = limit
        super().__init__(f"{what}: needs {needed} items, budget is {limit}")


class IdentityFailure(ManinLabError, AssertionError):
    """An exact identity or bound failed; carries the first witness found."""

    def __init__(self, message: str, witness: Any = None):
        self.witness = witness
        suffix = f" (witness: {witness!r})" if witness is not None else ""
        super().__init__(f"{message}{suffix}")
