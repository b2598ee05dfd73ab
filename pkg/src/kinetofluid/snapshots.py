"""Snapshot persistence: one JSON header line, then raw little-endian f64.

Arrays are written row-major.  Vector/tensor fields store the component
axis first; particle snapshots store the (N, 2d+1) block [x | v | w];
phase grids store the (n_x, n_v) density.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .fields import Grid, VectorField
from .vlasov import ParticleCloud, PhaseGrid


def _write(path, header: dict, array: np.ndarray):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write((json.dumps(header, sort_keys=True) + "\n").encode("utf-8"))
        fh.write(np.ascontiguousarray(array, dtype="<f8").tobytes())


def _read(path) -> tuple:
    with open(path, "rb") as fh:
        header = json.loads(fh.readline().decode("utf-8"))
        data = np.frombuffer(fh.read(), dtype="<f8")
    return header, data


def save_field(path, u: VectorField, time: float = 0.0):
    g = u.grid
    header = {
        "kind": "vector",
        "d": g.d,
        "n": g.n,
        "L": g.L,
        "components": g.d,
        "time": time,
    }
    _write(path, header, u.values)


def save_scalar_field(path, grid: Grid, values: np.ndarray, time: float = 0.0):
    header = {
        "kind": "scalar",
        "d": grid.d,
        "n": grid.n,
        "L": grid.L,
        "components": 1,
        "time": time,
    }
    _write(path, header, values)


def save_particles(path, cloud: ParticleCloud, L: float, time: float = 0.0, seed=None):
    header = {
        "kind": "particles",
        "d": cloud.d,
        "n": cloud.n,
        "L": L,
        "components": 2 * cloud.d + 1,
        "time": time,
        "seed": seed,
    }
    block = np.concatenate([cloud.x, cloud.v, cloud.w[:, None]], axis=1)
    _write(path, header, block)


def save_phase_grid(path, pg: PhaseGrid, time: float = 0.0):
    header = {
        "kind": "phase_grid",
        "d": 1,
        "n_x": pg.n_x,
        "n_v": pg.n_v,
        "L": pg.L,
        "V_max": pg.V_max,
        "components": 1,
        "time": time,
    }
    _write(path, header, pg.f)


def load_snapshot(path):
    """Load any snapshot; returns (header, reconstructed object)."""
    header, data = _read(path)
    kind = header["kind"]
    if kind == "vector":
        grid = Grid(header["d"], header["n"], header["L"])
        values = data.reshape((header["components"],) + grid.shape)
        return header, VectorField(grid, values.copy())
    if kind == "scalar":
        grid = Grid(header["d"], header["n"], header["L"])
        return header, data.reshape(grid.shape).copy()
    if kind == "particles":
        d = header["d"]
        block = data.reshape(header["n"], 2 * d + 1)
        return header, ParticleCloud(block[:, :d].copy(), block[:, d : 2 * d].copy(), block[:, -1].copy())
    if kind == "phase_grid":
        f = data.reshape(header["n_x"], header["n_v"]).copy()
        return header, PhaseGrid(header["n_x"], header["n_v"], header["L"], header["V_max"], f)
    raise ValueError(f"unknown snapshot kind {kind!r}")


def field_to_csv(path, u: VectorField):
    """Point-per-row CSV export; spatial dimensions one and two only."""
    g = u.grid
    if g.d > 2:
        raise ValueError("CSV export supports d <= 2")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    coords = g.meshgrid()
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"x{a}" for a in range(g.d)] + [f"u{c}" for c in range(g.d)])
        flat_coords = [c.ravel() for c in coords]
        flat_vals = [u.values[c].ravel() for c in range(g.d)]
        for i in range(flat_coords[0].size):
            writer.writerow([f"{fc[i]:.17g}" for fc in flat_coords] + [f"{fv[i]:.17g}" for fv in flat_vals])


def write_csv(path, columns, rows):
    """Plain numeric CSV with full float precision."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([f"{v:.17g}" if isinstance(v, float) else v for v in row])


def read_csv(path) -> tuple:
    with open(path, "r", newline="") as fh:
        reader = csv.reader(fh)
        columns = next(reader)
        rows = [[float(v) for v in row] for row in reader]
    return columns, np.array(rows)
