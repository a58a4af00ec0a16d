"""CSV serialization of simulation records.

Numbers are written with 17 significant digits so that every float64
round-trips exactly.
"""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Iterable

import numpy as np

from .sim import CYLINDER_COLUMNS, CylinderTrajectory, Trajectory

_FMT = "%.17g"


def _fmt(x: float) -> str:
    return _FMT % x


def write_trajectory_csv(path, traj: Trajectory) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        fh.write(",".join(traj.columns) + "\n")
        for row in traj.data:
            fh.write(",".join(_fmt(x) for x in row) + "\n")
    return path


def read_trajectory_csv(path) -> Trajectory:
    with Path(path).open(newline="") as fh:
        reader = csv.reader(fh)
        columns = next(reader)
        data = np.array([[float(x) for x in row] for row in reader], dtype=float)
    return Trajectory(data.reshape(-1, len(columns)), columns)


def write_cylinder_csv(path, runs: Iterable[CylinderTrajectory]) -> Path:
    """Long format: one row per ``(run_id, t)``, runs in ``run_id`` order."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        fh.write(",".join(CYLINDER_COLUMNS) + "\n")
        for run in sorted(runs, key=lambda r: r.run_id):
            for row in run.data:
                fields = [str(run.run_id)] + [_fmt(x) for x in row[:-1]] + [str(int(row[-1]))]
                fh.write(",".join(fields) + "\n")
    return path


def read_cylinder_csv(path) -> list:
    with Path(path).open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != CYLINDER_COLUMNS:
            raise ValueError(f"unexpected cylinder CSV header: {header}")
        by_run: dict = {}
        for row in reader:
            by_run.setdefault(int(row[0]), []).append([float(x) for x in row[1:]])
    return [CylinderTrajectory(k, np.array(v)) for k, v in sorted(by_run.items())]
