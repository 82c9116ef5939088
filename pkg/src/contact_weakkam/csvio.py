"""Plot-ready CSV files (17 significant digits, so values round-trip exactly) and report.txt."""
from __future__ import annotations

import datetime as _dt
from pathlib import Path

import numpy as np

from .model import TorusGrid1D
from .weakkam import GridFunction, ResidualReport

SOLUTION_COLUMNS = ("x", "u", "du_upwind", "residual", "kink_flag")
MEASURE_COLUMNS = ("x", "v", "mass")
TRAJECTORY_COLUMNS = ("t", "x", "p_or_v", "u", "H", "multiplier")


def _fmt(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.17g}"


def write_table(path, columns, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")
    return path


def read_table(path) -> tuple[list[str], np.ndarray]:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return header, data


def write_solution(path, u: GridFunction, res: ResidualReport) -> Path:
    rows = zip(u.grid.nodes, u.values, res.du_upwind, res.values.values, res.kinks.astype(int))
    return write_table(path, SOLUTION_COLUMNS, rows)


def read_solution(path, period: float) -> GridFunction:
    header, data = read_table(path)
    if header[:2] != ["x", "u"]:
        raise ValueError(f"{path}: expected columns starting x,u; got {header}")
    grid = TorusGrid1D(period, len(data))
    if not np.allclose(data[:, 0], grid.nodes, atol=1e-12 * period):
        raise ValueError(f"{path}: x column is not the uniform grid of period {period:g}")
    return GridFunction(grid, data[:, 1].copy())


def write_measure(path, mu, threshold: float = 0.0) -> Path:
    rows = [(x, v, m) for x, v, m in mu.support(threshold)] if threshold > 0 else [
        (mu.x_grid.nodes[i], mu.v_grid.nodes[j], mu.masses[i, j])
        for i, j in zip(*np.nonzero(mu.masses))]
    return write_table(path, MEASURE_COLUMNS, rows)


def write_trajectory(path, traj) -> Path:
    return write_table(path, TRAJECTORY_COLUMNS, zip(traj.t, traj.x, traj.y, traj.u, traj.H, traj.multiplier))


def write_report(path, items: dict) -> Path:
    """key=value lines; the timestamp lives here and nowhere else."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    stamp = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"timestamp={stamp}\n")
        for k, v in items.items():
            if isinstance(v, (bool, np.bool_)):
                v = "true" if v else "false"
            fh.write(f"{k}={_fmt(v) if isinstance(v, (float, int, np.floating, np.integer)) else v}\n")
    return path


def read_report(path) -> dict[str, str]:
    out = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            k, _, v = line.rstrip("\n").partition("=")
            out[k] = v
    return out
