"""CSV ingestion of decay series and CSV/JSON emission."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .errors import DataError
from .fitting import DecaySeries


def ingest_series(path, kind: str = "particle_number") -> DecaySeries:
    """Read a ``t_s,value[,sigma]`` CSV into a :class:`DecaySeries`.

    Errors name the offending line (1-based, header is line 1).
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except UnicodeDecodeError:
        raise DataError(f"{path}: not valid UTF-8") from None
    except OSError as exc:
        raise DataError(f"{path}: {exc}") from None
    rows = list(csv.reader(text.splitlines()))
    if not rows:
        raise DataError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    if header not in (["t_s", "value"], ["t_s", "value", "sigma"]):
        raise DataError(f"{path}:1: header must be 't_s,value' or 't_s,value,sigma', got {','.join(header)!r}")
    width = len(header)
    t, v, s = [], [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != width:
            raise DataError(f"{path}:{lineno}: expected {width} columns, got {len(row)}")
        try:
            vals = [float(c) for c in row]
        except ValueError:
            raise DataError(f"{path}:{lineno}: non-numeric entry in {','.join(row)!r}") from None
        if not all(math.isfinite(x) for x in vals):
            raise DataError(f"{path}:{lineno}: non-finite value")
        if t and vals[0] <= t[-1]:
            what = "duplicated timestamp" if vals[0] == t[-1] else "time goes backwards"
            raise DataError(f"{path}:{lineno}: {what} at t={vals[0]}")
        t.append(vals[0])
        v.append(vals[1])
        if width == 3:
            s.append(vals[2])
    if not t:
        raise DataError(f"{path}: no data rows")
    if len(t) < 2:
        raise DataError(f"{path}: need at least 2 data rows")
    try:
        return DecaySeries(np.array(t), np.array(v), kind, np.array(s) if width == 3 else None)
    except DataError as exc:
        raise DataError(f"{path}: {exc}") from None


def write_series(path, series: DecaySeries) -> None:
    cols = [series.t, series.values] + ([series.sigma] if series.sigma is not None else [])
    header = ["t_s", "value"] + (["sigma"] if series.sigma is not None else [])
    write_csv(path, header, np.column_stack(cols))


def format_csv(header, rows) -> str:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(x) for x in row))
    return "\n".join(lines) + "\n"


def write_csv(path, header, rows) -> None:
    Path(path).write_text(format_csv(header, rows), encoding="utf-8")


def _fmt(x) -> str:
    if isinstance(x, str):
        return x
    return repr(float(x))


def _clean(obj):
    # plain JSON types only; non-finite floats become strings
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    if isinstance(obj, Path):
        return str(obj)
    return obj


def to_json(obj) -> str:
    return json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n"


def write_json(path, obj) -> None:
    Path(path).write_text(to_json(obj), encoding="utf-8")
