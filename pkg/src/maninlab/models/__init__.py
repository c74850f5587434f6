"""Data models for maninlab."""

from maninlab.models.config import RunConfig
from maninlab.models.records import (
    CertificationRecord,
    ConeRow,
    CountRecord,
    DegreeSummary,
    GammaRow,
)
from maninlab.models.surface_document import SurfaceDocument

__all__ = [
    "CertificationRecord",
    "ConeRow",
    "CountRecord",
    "DegreeSummary",
    "GammaRow",
    "RunConfig",
    "SurfaceDocument",
]
