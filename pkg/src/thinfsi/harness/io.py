"""Deterministic CSV and manifest files, plus snapshot export."""
from __future__ import annotations

import csv
import math
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from ..fields import PeriodicField2D, write_field_csv


def fmt(value: Any) -> str:
    """Stable text form: floats via ``repr`` (shortest round-trip), bools as 0/1."""
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(v)
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return str(value)


def write_csv(path: str | Path, header: Sequence[str], rows: Iterable[Mapping[str, Any] | Sequence[Any]]) -> Path:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    with p.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            vals = [row[k] for k in header] if isinstance(row, Mapping) else list(row)
            if len(vals) != len(header):
                raise ValueError(f"row has {len(vals)} fields, header has {len(header)}")
            w.writerow([fmt(v) for v in vals])
    return p


def read_csv(path: str | Path) -> list[dict[str, str]]:
    with Path(path).open(newline="") as fh:
        return list(csv.DictReader(fh))


def append_csv(path: str | Path, header: Sequence[str], rows: Iterable[Mapping[str, Any]]) -> Path:
    """Append rows, writing the header only when the file is new."""
    p = Path(path)
    new = not p.exists()
    p.parent.mkdir(parents=True, exist_ok=True)
    with p.open("a", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if new:
            w.writerow(header)
        for row in rows:
            w.writerow([fmt(row[k]) for k in header])
    return p


def write_manifest(path: str | Path, entries: Mapping[str, Any]) -> Path:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text("".join(f"{k}={fmt(v)}\n" for k, v in sorted(entries.items())))
    return p


def read_manifest(path: str | Path) -> dict[str, str]:
    out = {}
    for line in Path(path).read_text().splitlines():
        if "=" in line:
            k, v = line.split("=", 1)
            out[k] = v
    return out


def export_snapshots(directory: str | Path, times: Sequence[float], fields: Sequence, prefix: str = "w3",
                     extra: str = "") -> Path:
    """One field CSV per snapshot plus ``index.csv`` listing ``step, t, file``."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    rows = []
    width = max(4, len(str(len(times))))
    for i, (t, f) in enumerate(zip(times, fields)):
        if isinstance(f, np.ndarray):
            f = PeriodicField2D(f)
        name = f"{prefix}_{i:0{width}d}.csv"
        write_field_csv(d / name, f, extra=extra)
        rows.append((i, float(t), name))
    return write_csv(d / f"{prefix}_index.csv", ["step", "t", "file"], rows)
