"""File formats: signal CSVs, JSON documents and prediction CSVs.

Signal files hold one sample per line with comma separated columns. An
optional first line of column names is skipped, as are blank lines and lines
starting with ``#``. Everything read from disk that does not parse raises
`DataError` carrying the path and, where known, the 1-based line number.
"""
from __future__ import annotations

import csv
import json
import logging
import math
import os
from typing import Any, Sequence, Tuple

import numpy as np

from .errors import DataError

logger = logging.getLogger(__name__)


def _is_header(fields: Sequence[str]) -> bool:
    for field in fields:
        try:
            float(field)
        except ValueError:
            return True
    return False


def read_table_csv(path, min_columns: int = 1) -> np.ndarray:
    """All numeric rows of a CSV file as a 2D float array."""
    path = os.fspath(path)
    rows = []
    width = None
    try:
        with open(path, "r", encoding="utf8", newline="") as fh:
            for lineno, fields in enumerate(csv.reader(fh), start=1):
                fields = [f.strip() for f in fields]
                if not fields or not any(fields) or fields[0].startswith("#"):
                    continue
                if width is None and not rows and _is_header(fields):
                    logger.debug("%s: skipping header %s", path, fields)
                    width = len(fields)
                    continue
                try:
                    values = [float(f) for f in fields]
                except ValueError:
                    raise DataError(f"non-numeric value in {fields}", path=path, line=lineno) from None
                if width is None:
                    width = len(values)
                if len(values) != width:
                    raise DataError(f"expected {width} columns, got {len(values)}", path=path, line=lineno)
                if len(values) < min_columns:
                    raise DataError(f"expected at least {min_columns} columns, got {len(values)}", path=path, line=lineno)
                rows.append(values)
    except FileNotFoundError:
        raise DataError("file not found", path=path) from None
    except (OSError, UnicodeDecodeError) as exc:
        raise DataError(f"cannot read file: {exc}", path=path) from exc
    if not rows:
        raise DataError("no data rows", path=path)
    table = np.asarray(rows, dtype=np.float64)
    if not np.all(np.isfinite(table)):
        bad = int(np.nonzero(~np.all(np.isfinite(table), axis=1))[0][0])
        raise DataError(f"non-finite value in data row {bad + 1}", path=path)
    return table


def read_signal_csv(path, columns: Tuple[int, int] = (0, 1)) -> Tuple[np.ndarray, np.ndarray]:
    """Input and output signals (u, y) from two columns of a CSV file."""
    table = read_table_csv(path, min_columns=max(columns) + 1)
    return table[:, columns[0]].copy(), table[:, columns[1]].copy()


def write_signal_csv(path, u, y, names: Tuple[str, str] = ("u", "y")) -> None:
    with open(path, "w", encoding="utf8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(names)
        for a, b in zip(np.asarray(u, dtype=float), np.asarray(y, dtype=float)):
            writer.writerow([repr(float(a)), repr(float(b))])


def write_predictions_csv(path, index, z, zhat) -> None:
    """One row per sample: time index, measured output, prediction."""
    with open(path, "w", encoding="utf8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["k", "z", "zhat"])
        for k, a, b in zip(index, z, zhat):
            writer.writerow([int(k), repr(float(a)), repr(float(b))])


def _strict(doc: Any) -> Any:
    """Copy of ``doc`` with NaN and infinite floats replaced by None."""
    if isinstance(doc, float):
        return doc if math.isfinite(doc) else None
    if isinstance(doc, dict):
        return {key: _strict(value) for key, value in doc.items()}
    if isinstance(doc, (list, tuple)):
        return [_strict(value) for value in doc]
    return doc


def save_json(path, doc: Any) -> None:
    """Write a JSON document with sorted keys, so equal inputs give equal bytes.

    Non-finite numbers are written as ``null``; a diverged simulation is
    recognisable from its ``diverged`` flag.
    """
    with open(path, "w", encoding="utf8") as fh:
        json.dump(_strict(doc), fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")


def load_json(path) -> Any:
    path = os.fspath(path)
    try:
        with open(path, "r", encoding="utf8") as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise DataError("file not found", path=path) from None
    except json.JSONDecodeError as exc:
        raise DataError(f"invalid JSON: {exc.msg}", path=path, line=exc.lineno) from exc
    except OSError as exc:
        raise DataError(f"cannot read file: {exc}", path=path) from exc


__all__ = [
    "read_table_csv",
    "read_signal_csv",
    "write_signal_csv",
    "write_predictions_csv",
    "save_json",
    "load_json",
]
