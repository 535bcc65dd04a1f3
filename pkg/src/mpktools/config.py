"""Configuration files and option precedence.

A configuration file is one JSON object whose top-level keys name sections
(``optimizer``, ``experiment``, ``narx``, ``tuning``, ``kernel``, ...). For
every option the value comes from the command line flag if given, else from
the file section, else from the dataclass default.
"""
from __future__ import annotations

import dataclasses
import logging
from typing import Mapping, Optional, Type, TypeVar

from .errors import DataError
from .io import load_json

logger = logging.getLogger(__name__)

T = TypeVar("T")


def load_config_file(path) -> dict:
    """Read a configuration file; ``None`` gives an empty configuration."""
    if path is None:
        return {}
    doc = load_json(path)
    if not isinstance(doc, dict):
        raise DataError("configuration must be a JSON object", path=str(path))
    logger.debug("loaded configuration sections %s from %s", sorted(doc), path)
    return doc


def section(doc: Mapping, name: str) -> dict:
    value = doc.get(name, {})
    if not isinstance(value, dict):
        raise DataError(f"configuration section {name!r} must be an object")
    return dict(value)


def merge_options(cls: Type[T], file_options: Optional[Mapping] = None, flags: Optional[Mapping] = None) -> T:
    """Build a ``cls`` instance; flags that are ``None`` were not given."""
    names = {f.name for f in dataclasses.fields(cls) if f.init}
    merged: dict = {}
    for source, values in (("configuration", file_options or {}), ("flags", flags or {})):
        unknown = set(values) - names
        if unknown:
            raise DataError(f"unknown {cls.__name__} options in {source}: {sorted(unknown)}")
        merged.update({k: v for k, v in values.items() if v is not None})
    try:
        return cls(**merged)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, DataError):
            raise
        raise DataError(f"invalid {cls.__name__} options: {exc}") from exc


__all__ = ["load_config_file", "section", "merge_options"]
