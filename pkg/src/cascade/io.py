"""Serialisation of trajectories, Wigner grids and reports.

CSV files carry a header row ``t_s,<observable names>`` and every float is
written with 17 significant digits, which round-trips IEEE doubles exactly.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .integrator import Trajectory


def fmt(x) -> str:
    return format(float(x), ".17g")


def _open(path, mode="w"):
    try:
        return open(path, mode, newline="")
    except OSError as exc:
        raise OSError(f"cannot open {path} for {'writing' if 'w' in mode else 'reading'}: {exc.strerror}") from exc


def write_csv(traj: Trajectory, path) -> Path:
    path = Path(path)
    names = list(traj.observables)
    with _open(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t_s", *names])
        for i, t in enumerate(traj.times):
            w.writerow([fmt(t), *(fmt(traj.observables[n][i]) for n in names)])
    return path


def read_csv(path) -> Trajectory:
    with _open(path, "r") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0][:1] != ["t_s"]:
        raise ValueError(f"{path}: missing t_s header")
    names = rows[0][1:]
    body = np.array([[float(v) for v in r] for r in rows[1:]], dtype=float).reshape(-1, len(names) + 1)
    return Trajectory(times=body[:, 0].copy(), observables={n: body[:, j + 1].copy() for j, n in enumerate(names)})


def _clean(obj):
    """JSON-safe copy: complex -> {re, im}, arrays -> lists, non-finite -> null."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": _clean(obj.real), "im": _clean(obj.imag)}
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj) if math.isfinite(obj) else None
    return obj


def write_json(obj, path) -> Path:
    path = Path(path)
    with _open(path) as fh:
        json.dump(_clean(obj), fh, indent=2, sort_keys=False)
        fh.write("\n")
    return path


def trajectory_payload(traj: Trajectory, metadata: dict | None = None) -> dict:
    # floats go through repr-exact json; stats exclude wall-clock time
    stats = {k: v for k, v in traj.stats.items() if k != "wall_time_s"}
    return {
        "metadata": metadata or {},
        "stats": stats,
        "t_s": [float(t) for t in traj.times],
        "series": {k: [float(v) for v in vals] for k, vals in traj.observables.items()},
    }


def read_json_trajectory(path) -> Trajectory:
    with _open(path, "r") as fh:
        data = json.load(fh)
    return Trajectory(times=np.array(data["t_s"], float),
                      observables={k: np.array(v, float) for k, v in data["series"].items()},
                      stats=data.get("stats", {}))


def write_wigner_csv(grid: np.ndarray, w: np.ndarray, path) -> Path:
    """Columns ``re_beta,im_beta,w`` for every grid point (row-major)."""
    path = Path(path)
    grid = np.asarray(grid).ravel()
    w = np.asarray(w).ravel()
    with _open(path) as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["re_beta", "im_beta", "w"])
        for b, v in zip(grid, w):
            out.writerow([fmt(b.real), fmt(b.imag), fmt(v)])
    return path


def read_wigner_csv(path):
    with _open(path, "r") as fh:
        rows = list(csv.reader(fh))
    data = np.array([[float(v) for v in r] for r in rows[1:]], float).reshape(-1, 3)
    return data[:, 0] + 1j * data[:, 1], data[:, 2]
