"""Delimiter-separated numeric matrix files.

Files are UTF-8 text, one row per line, comma or tab separated. A header row
is optional and detected by its first row failing to parse as numbers.
Numbers are written with 17 significant digits so that reruns can be compared
byte for byte.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from noisydr.errors import IngestionError


def _format(x: float) -> str:
    return format(float(x), ".17g")


def _split(line: str) -> list[str]:
    if "\t" in line:
        return [c.strip() for c in line.split("\t")]
    return [c.strip() for c in line.split(",")]


def _parse_row(cells: list[str]) -> list[float] | None:
    try:
        return [float(c) for c in cells]
    except ValueError:
        return None


def read_matrix(path, expected_cols: int | None = None) -> np.ndarray:
    """Read a numeric matrix file into a float64 array of shape (n, d)."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise IngestionError(f"{path}: cannot read file ({exc})") from exc

    rows: list[list[float]] = []
    width = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        cells = _split(line)
        values = _parse_row(cells)
        if values is None:
            if not rows and width is None:
                # header row
                width = len(cells)
                continue
            raise IngestionError(f"{path}:{lineno}: non-numeric entry in {raw!r}")
        if width is None:
            width = len(values)
        if len(values) != width:
            raise IngestionError(
                f"{path}:{lineno}: expected {width} columns, found {len(values)}"
            )
        rows.append(values)

    if not rows:
        raise IngestionError(f"{path}: no numeric rows")
    data = np.asarray(rows, dtype=float)
    if not np.all(np.isfinite(data)):
        bad = int(np.argwhere(~np.isfinite(data))[0][0])
        raise IngestionError(f"{path}: non-finite value in data row {bad + 1}")
    if expected_cols is not None and data.shape[1] != expected_cols:
        raise IngestionError(
            f"{path}: expected {expected_cols} columns, found {data.shape[1]}"
        )
    return data


def read_labels(path) -> np.ndarray:
    """Read a single-column integer label file."""
    data = read_matrix(path, expected_cols=1)[:, 0]
    if not np.all(data == np.round(data)):
        raise IngestionError(f"{path}: labels must be integers")
    return data.astype(np.int64)


def format_matrix(data: np.ndarray, header: list[str] | None = None) -> str:
    data = np.atleast_2d(np.asarray(data, dtype=float))
    lines = []
    if header is not None:
        lines.append(",".join(header))
    for row in data:
        lines.append(",".join(_format(v) for v in row))
    return "\n".join(lines) + "\n"


def write_matrix(path, data: np.ndarray, header: list[str] | None = None) -> None:
    Path(path).write_text(format_matrix(data, header), encoding="utf-8")


def write_labels(path, labels: np.ndarray) -> None:
    text = "".join(f"{int(v)}\n" for v in labels)
    Path(path).write_text(text, encoding="utf-8")
