"""
Helper functions for text and CSV output.

This module contains utility functions to:
- Format density matrices and quasiprobability vectors for the terminal.
- Write figure-ready CSV tables with a fixed column order.
- Render fixed-column plain-text reports.
"""

import csv
import json
import math
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np

from utils.errors import DatasetIOError


def format_number(value: Any, precision: int = 6) -> str:
    """
    Format a table cell.

    None and NaN render as '-', floats in general format, everything else via str.
    """
    if value is None:
        return "-"
    if isinstance(value, (float, np.floating)):
        if math.isnan(value):
            return "-"
        return f"{value:.{precision}g}"
    return str(value)


def format_complex(z: complex, precision: int = 4) -> str:
    re_part, im_part = float(np.real(z)), float(np.imag(z))
    if abs(im_part) < 10 ** (-precision):
        return f"{re_part:+.{precision}f}"
    return f"{re_part:+.{precision}f}{im_part:+.{precision}f}j"


def format_matrix(m: np.ndarray, precision: int = 4) -> str:
    """Render a (complex) matrix one row per line with aligned columns."""
    cells = [[format_complex(z, precision) for z in row] for row in np.asarray(m)]
    width = max(len(c) for row in cells for c in row)
    return "\n".join("  ".join(c.rjust(width) for c in row) for row in cells)


def format_eqp(coeffs: Sequence[float], labels: Sequence[str], tol: float = 1e-9, only_nonzero: bool = True) -> str:
    """
    One line per component; negative entries are marked with '<'.

    Args:
        coeffs: Quasiprobability vector.
        labels: Component labels (frame labels or atom descriptions).
        tol: Components with magnitude below this are treated as zero.
        only_nonzero: Skip zero components.
    """
    lines = []
    for label, value in zip(labels, coeffs):
        if only_nonzero and abs(value) <= tol:
            continue
        marker = " <" if value < -tol else ""
        lines.append(f"{label:>12}  {value:+.6f}{marker}")
    return "\n".join(lines)


def _csv_cell(value: Any) -> Any:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (float, np.floating)):
        return "" if math.isnan(value) else repr(float(value))
    return value


def write_csv(path: Union[str, Path], columns: Sequence[str], rows: Sequence[Dict[str, Any]]) -> None:
    """
    Write rows as CSV with the given column order.

    Floats use their shortest round-trip representation so reruns produce
    byte-identical files.

    Raises:
        DatasetIOError: If the file cannot be written.
    """
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", encoding="utf-8", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(columns), extrasaction="ignore", lineterminator="\n")
            writer.writeheader()
            for row in rows:
                writer.writerow({k: _csv_cell(row.get(k)) for k in columns})
    except OSError as e:
        raise DatasetIOError(f"Cannot write {path}: {e}")


def read_csv(path: Union[str, Path]) -> List[Dict[str, str]]:
    """
    Read a CSV written by ``write_csv``.

    Raises:
        DatasetIOError: If the file cannot be read.
    """
    path = Path(path)
    try:
        with path.open("r", encoding="utf-8", newline="") as fh:
            return list(csv.DictReader(fh))
    except OSError as e:
        raise DatasetIOError(f"Cannot read {path}: {e}")


def format_table(columns: Sequence[str], rows: Sequence[Dict[str, Any]], title: Optional[str] = None) -> str:
    """Fixed-column plain-text table; column widths fit the widest cell."""
    cells = [[format_number(row.get(c)) for c in columns] for row in rows]
    widths = [max([len(c)] + [len(r[i]) for r in cells]) for i, c in enumerate(columns)]

    lines = []
    if title:
        lines.append(title)
    lines.append("  ".join(c.ljust(w) for c, w in zip(columns, widths)))
    lines.append("  ".join("-" * w for w in widths))
    for row in cells:
        lines.append("  ".join(v.ljust(w) for v, w in zip(row, widths)))
    return "\n".join(lines)


def format_key_values(data: Dict[str, Any]) -> str:
    """Aligned 'key: value' lines for command summaries."""
    if not data:
        return ""
    width = max(len(k) for k in data)
    return "\n".join(f"{k.ljust(width)} : {format_number(v)}" for k, v in data.items())


def write_json(path: Union[str, Path], data: Dict[str, Any]) -> None:
    """
    Write a JSON document with sorted keys.

    Raises:
        DatasetIOError: If the file cannot be written.
    """
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    except OSError as e:
        raise DatasetIOError(f"Cannot write {path}: {e}")


def read_json(path: Union[str, Path]) -> Dict[str, Any]:
    """
    Read a JSON document.

    Raises:
        DatasetIOError: If the file is missing or not valid JSON.
    """
    path = Path(path)
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except OSError as e:
        raise DatasetIOError(f"Cannot read {path}: {e}")
    except json.JSONDecodeError as e:
        raise DatasetIOError(f"{path}:{e.lineno}: invalid JSON: {e.msg}")


def write_text(path: Union[str, Path], text: str) -> None:
    """
    Write a plain-text report.

    Raises:
        DatasetIOError: If the file cannot be written.
    """
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text if text.endswith("\n") else text + "\n", encoding="utf-8")
    except OSError as e:
        raise DatasetIOError(f"Cannot write {path}: {e}")
