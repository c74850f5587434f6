"""Surface catalog loading module."""

from __future__ import annotations

import glob
import logging
import os
from typing import Any, Dict, List

import yaml

from maninlab.models.config import CATALOG_ENV_VAR

logger = logging.getLogger(__name__)

_CATALOG_CACHE: Dict[str, Dict[str, Any]] = {}


def _catalog_dirs() -> List[str]:
    dirs = [os.path.dirname(__file__)]
    extra = os.getenv(CATALOG_ENV_VAR)
    if extra:
        dirs.append(os.path.expanduser(extra))
    return dirs


def get_surface_documents(refresh: bool = False) -> Dict[str, Dict[str, Any]]:
    """Load every surface document found in the catalog directories.

    The built-in directory is searched first; a directory named by the
    catalog environment variable may add documents or shadow built-in ones.

    Args:
        refresh: Drop the cache and rescan the directories.

    Returns:
        Mapping from file stem to the parsed YAML document.
    """
    if _CATALOG_CACHE and not refresh:
        return dict(_CATALOG_CACHE)

    _CATALOG_CACHE.clear()
    for directory in _catalog_dirs():
        for yaml_file in sorted(glob.glob(os.path.join(directory, "*.yaml"))):
            stem = os.path.splitext(os.path.basename(yaml_file))[0]
            try:
                with open(yaml_file, "r", encoding="utf-8") as f:
                    content = yaml.safe_load(f)
            except (yaml.YAMLError, IOError) as e:
                # Keep loading the rest of the catalog
                logger.warning("Failed to load %s: %s", yaml_file, e)
                continue
            if content:
                _CATALOG_CACHE[stem] = content

    logger.info("Surface catalog holds %s documents", len(_CATALOG_CACHE))
    return dict(_CATALOG_CACHE)


def catalog_names() -> List[str]:
    return sorted(get_surface_documents())


def get_surface_document(name: str) -> Dict[str, Any]:
    """Return one catalog document by name."""
    documents = get_surface_documents()
    if name not in documents:
        available = ", ".join(sorted(documents))
        raise KeyError(f"Surface '{name}' not found. Available surfaces: {available}")
    return dict(documents[name])
