"""CSV and JSON reading/writing shared by the command-line tools.

Numbers are written with 17 significant digits so that a float read back from
an output file is bit-identical to the value that was written.
"""

from __future__ import annotations

import datetime as dt
import json
import math
import os
import re
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import NonFiniteValue, ParseError

_SPLIT = re.compile(r"[,\s]+")


def format_number(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.17g" % float(v)
    return str(v)


def write_csv(path: str | os.PathLike | None, header: Sequence[str], rows: Iterable[Sequence]) -> str:
    """Write comma-separated rows; returns the text (and writes it if ``path``)."""
    lines = [",".join(header)]
    lines.extend(",".join(format_number(v) for v in row) for row in rows)
    text = "\n".join(lines) + "\n"
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text


def dump_json(doc) -> str:
    return json.dumps(doc, indent=1, sort_keys=True, allow_nan=False) + "\n"


def write_json(path: str | os.PathLike | None, doc) -> str:
    text = dump_json(doc)
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text


def _split(line: str) -> list[str]:
    line = line.strip()
    if not line:
        return []
    return [c.strip() for c in (line.split(",") if "," in line else _SPLIT.split(line))]


def _is_number(cell: str) -> bool:
    try:
        float(cell)
    except ValueError:
        return False
    return True


def read_table(text: str) -> tuple[list[str] | None, list[tuple[int, list[str]]]]:
    """Split CSV text into an optional header and ``(line number, cells)`` rows.

    The first non-blank line is a header when any of its cells is not numeric.
    Lines starting with ``#`` are comments.
    """
    header = None
    rows = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        if raw.lstrip().startswith("#"):
            continue
        cells = _split(raw)
        if not cells:
            continue
        if header is None and not rows and not all(_is_number(c) for c in cells):
            header = cells
            continue
        rows.append((lineno, cells))
    return header, rows


def _column_index(header: list[str] | None, column: str | int | None, width: int) -> int:
    if column is None:
        return 0
    if isinstance(column, int) or str(column).isdigit():
        idx = int(column) - 1
        if not 0 <= idx < width:
            raise ParseError(f"column {column} out of range 1..{width}")
        return idx
    if header is None or column not in header:
        raise ParseError(f"no column named {column!r}" + (f"; header is {header}" if header else "; file has no header"))
    return header.index(column)


def _read_text(path: str | os.PathLike) -> str:
    if str(path) == "-":
        import sys

        return sys.stdin.read()
    try:
        return Path(path).read_text(encoding="utf-8")
    except UnicodeDecodeError as exc:
        raise ParseError(f"{path}: not valid UTF-8 ({exc})") from exc


def parse_column(text: str, column: str | int | None = None, source: str = "input") -> np.ndarray:
    header, rows = read_table(text)
    if not rows:
        raise ParseError(f"{source}: no data rows")
    width = len(header) if header else max(len(c) for _, c in rows)
    idx = _column_index(header, column, width)
    out = np.empty(len(rows))
    for j, (lineno, cells) in enumerate(rows):
        if idx >= len(cells):
            raise ParseError(f"{source}: line {lineno}: missing column {idx + 1}")
        try:
            v = float(cells[idx])
        except ValueError:
            raise ParseError(f"{source}: line {lineno}: non-numeric value {cells[idx]!r}") from None
        if not math.isfinite(v):
            raise NonFiniteValue(f"{source}: line {lineno}: non-finite value {cells[idx]!r}")
        out[j] = v
    return out


def read_column(path: str | os.PathLike, column: str | int | None = None) -> np.ndarray:
    """One numeric column of a CSV file (or ``-`` for stdin)."""
    return parse_column(_read_text(path), column, str(path))


_MISSING = {"", "na", "nan", "null", "none", "-"}


def read_dated_series(
    path: str | os.PathLike, date_column: str | int | None = 1, value_column: str | int | None = 2
) -> tuple[list[dt.date], list[float | None]]:
    """Date column (ISO ``YYYY-MM-DD``) and value column; blanks/``NA`` mean missing."""
    text = _read_text(path)
    header = None
    rows = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        if raw.lstrip().startswith("#") or not raw.strip():
            continue
        cells = [c.strip() for c in raw.split(",")] if "," in raw else _SPLIT.split(raw.strip())
        if header is None and not rows:
            try:
                dt.date.fromisoformat(cells[0])
            except ValueError:
                header = cells
                continue
        rows.append((lineno, cells))
    if not rows:
        raise ParseError(f"{path}: no data rows")
    width = len(header) if header else max(len(c) for _, c in rows)
    di = _column_index(header, date_column, width)
    vi = _column_index(header, value_column, width)
    dates, values = [], []
    for lineno, cells in rows:
        try:
            d = dt.date.fromisoformat(cells[di])
        except (ValueError, IndexError):
            raise ParseError(f"{path}: line {lineno}: bad date {cells[di] if di < len(cells) else ''!r}") from None
        cell = cells[vi] if vi < len(cells) else ""
        if cell.lower() in _MISSING:
            v = None
        else:
            try:
                v = float(cell)
            except ValueError:
                raise ParseError(f"{path}: line {lineno}: non-numeric value {cell!r}") from None
            if not math.isfinite(v):
                raise NonFiniteValue(f"{path}: line {lineno}: non-finite value {cell!r}")
        dates.append(d)
        values.append(v)
    return dates, values
