"""Comma-separated snapshot and diagnostics tables.

Every file starts with ``#`` metadata lines, then a header row naming the
columns. Floats are written with 17 significant digits, so a write-then-read
round trip is exact and repeated runs produce identical bytes.
"""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .core import Ensemble, Frame, PhysicalParams
from .diagnostics import DIAG_COLUMNS

SNAPSHOT_COLUMNS = ("id", "x1", "x2", "v1", "v2", "w")
UNITS_LINE = "# units: dimensionless simulation units (lengths, velocities, time and weights)"


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def snapshot_path(out_dir: Path | str, index: int) -> Path:
    return Path(out_dir) / f"snapshot_{index}.csv"


def write_snapshot(path: Path | str, ens: Ensemble) -> None:
    p = ens.params
    path = Path(path)
    with path.open("w", newline="") as fh:
        fh.write(f"# frame={ens.frame.value} t={_fmt(ens.time)} omega_c={_fmt(p.omega_c)} "
                 f"epsilon={_fmt(p.epsilon)} delta={_fmt(p.delta)}\n")
        fh.write(UNITS_LINE + "\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SNAPSHOT_COLUMNS)
        for i, x, v, w in zip(ens.ids, ens.pos, ens.vel, ens.weights):
            writer.writerow([int(i), _fmt(x[0]), _fmt(x[1]), _fmt(v[0]), _fmt(v[1]), _fmt(w)])


def _read_table(path: Path):
    meta = {}
    body = []
    with Path(path).open() as fh:
        for line in fh:
            if line.startswith("#"):
                for tok in line[1:].split():
                    if "=" in tok:
                        k, v = tok.split("=", 1)
                        meta[k] = v
            else:
                body.append(line)
    rows = list(csv.reader(body))
    if not rows:
        raise ValueError(f"{path}: missing header row")
    return meta, rows[0], rows[1:]


def read_snapshot(path: Path | str) -> Ensemble:
    meta, header, rows = _read_table(Path(path))
    if tuple(header) != SNAPSHOT_COLUMNS:
        raise ValueError(f"{path}: expected columns {','.join(SNAPSHOT_COLUMNS)}")
    try:
        params = PhysicalParams(float(meta["omega_c"]), float(meta["epsilon"]),
                                float(meta["delta"]))
        frame, time = Frame(meta["frame"]), float(meta["t"])
    except KeyError as exc:
        raise ValueError(f"{path}: metadata line lacks {exc}") from None
    data = np.array([[float(c) for c in r] for r in rows], dtype=np.float64).reshape(-1, 6)
    return Ensemble(data[:, 1:3], data[:, 3:5], data[:, 5], params, time, frame,
                    data[:, 0].astype(np.int64))


def write_diag(path: Path | str, rows: Iterable[Mapping[str, float]]) -> None:
    with Path(path).open("w", newline="") as fh:
        fh.write(UNITS_LINE + "\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(DIAG_COLUMNS)
        for r in rows:
            writer.writerow([_fmt(r[c]) for c in DIAG_COLUMNS])


def read_diag(path: Path | str) -> list[dict]:
    _, header, rows = _read_table(Path(path))
    missing = set(DIAG_COLUMNS) - set(header)
    if missing:
        raise ValueError(f"{path}: missing column(s) {', '.join(sorted(missing))}")
    return [{k: float(v) for k, v in zip(header, r)} for r in rows]


def write_table(path: Path | str, columns, rows) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for r in rows:
            writer.writerow([_fmt(c) if isinstance(c, (float, np.floating)) else c for c in r])
