"""Run configuration: flat dotted-key text files.

Grammar: one ``section.key = value`` per line, ``#`` comments, blank lines
ignored.  Values are booleans (``true``/``false``), integers, floats,
bare strings, or comma-separated lists of these.  Parsing then
serializing then parsing is the identity on the key-value map.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from .constitutive import ViscosityLaw
from .fields import Grid, VectorField, leray_project
from .vlasov import GaussianBump


class ConfigError(ValueError):
    """Malformed or inadmissible configuration; message carries the line/key."""


def _parse_scalar(tok: str):
    low = tok.lower()
    if low in ("true", "false"):
        return low == "true"
    try:
        return int(tok)
    except ValueError:
        pass
    try:
        return float(tok)
    except ValueError:
        pass
    return tok


def parse_config_text(text: str) -> dict:
    """Parse the flat key-value grammar into an ordered dict."""
    out: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, val = line.partition("=")
        key = key.strip()
        val = val.strip()
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        if val == "":
            out[key] = ""
        elif "," in val:
            out[key] = [_parse_scalar(t.strip()) for t in val.split(",")]
        else:
            out[key] = _parse_scalar(val)
    return out


def _fmt_scalar(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def serialize_config(values: dict) -> str:
    """Canonical text form: sorted keys, one per line."""
    lines = []
    for key in sorted(values):
        v = values[key]
        if isinstance(v, list):
            lines.append(f"{key} = {', '.join(_fmt_scalar(x) for x in v)}")
        else:
            lines.append(f"{key} = {_fmt_scalar(v)}")
    return "\n".join(lines) + "\n"


_DEFAULTS = {
    "mode": "fixed_point",
    "dimension": 2,
    "grid.n": 32,
    "grid.L": 2.0 * math.pi,
    "phase.n_x": 64,
    "phase.n_v": 128,
    "phase.v_max": 5.0,
    "kinetic.representation": "particles",
    "particles.n": 2000,
    "particles.seed": 7,
    "sampler.kind": "gaussian_bump",
    "sampler.mass": 0.3,
    "sampler.x_sigma": 0.9,
    "sampler.v_sigma": 0.6,
    "law.variant": "power_law_a",
    "law.q": 4.0,
    "law.m0": 1.0,
    "law.sigma": 0.0,
    "time.dt": 5e-3,
    "time.T": 0.5,
    "coupling.kappa": 3.0,
    "coupling.tol": 1e-9,
    "coupling.max_iter": 30,
    "coupling.M_cap": 50.0,
    "weights.k": 3,
    "weights.p": 6.0,
    "u0.kind": "single_mode",
    "u0.amplitude": 0.2,
    "u0.component": 0,
    "u0.mode_axis": -1,
    "output.dir": "out",
    "output.every": 10,
    "smalldata.epsilon": 0.1,
    "smalldata.window": 0.5,
    "fluid.dealias": True,
    "fluid.cfl_cap": 0.8,
    "contraction.sweep": [0.4, 0.2, 0.1, 0.05],
    "contraction.amplitude": 0.3,
}

_KNOWN_EXTRA = {"sampler.x_center", "sampler.v_mean", "u0.value"}


@dataclass
class RunConfig:
    """Validated run parameters plus the raw key-value map."""

    values: dict = dc_field(default_factory=dict)

    def __post_init__(self):
        unknown = [k for k in self.values if k not in _DEFAULTS and k not in _KNOWN_EXTRA]
        if unknown:
            raise ConfigError(f"unknown keys: {', '.join(sorted(unknown))}")
        merged = dict(_DEFAULTS)
        merged.update(self.values)
        self.values = merged
        self._validate()

    def __getitem__(self, key: str):
        return self.values[key]

    def get(self, key: str, default=None):
        return self.values.get(key, default)

    def _validate(self):
        v = self.values
        if v["mode"] not in ("fixed_point", "small_data"):
            raise ConfigError(f"mode: expected fixed_point or small_data, got {v['mode']!r}")
        d = v["dimension"]
        if d not in (1, 2, 3):
            raise ConfigError("dimension: must be 1, 2 or 3")
        k = v["weights.k"]
        p = v["weights.p"]
        if k < 3:
            raise ConfigError("weights.k: must be at least 3")
        if not p > max(5.0, (2 * k + 3) / 2.0):
            raise ConfigError(
                f"weights.p: admissibility requires p > max(5, (2k+3)/2) = "
                f"{max(5.0, (2 * k + 3) / 2.0)}, got {p}"
            )
        if v["time.dt"] <= 0 or v["time.T"] <= 0:
            raise ConfigError("time.dt, time.T: must be positive")
        if v["time.dt"] * v["grid.n"] / v["grid.L"] > 100.0:
            raise ConfigError("time.dt: fails the dt*n/L sanity bound (too large for the grid)")
        if v["kinetic.representation"] not in ("particles", "phase_grid"):
            raise ConfigError("kinetic.representation: particles or phase_grid")
        if v["kinetic.representation"] == "phase_grid" and d != 1:
            raise ConfigError("kinetic.representation: phase_grid requires dimension = 1")
        # constructor enforces the law invariants; surface the message with the key
        try:
            self.law()
        except ValueError as e:
            raise ConfigError(f"law.*: {e}") from e

    # -- builders ----------------------------------------------------------

    def law(self) -> ViscosityLaw:
        v = self.values
        return ViscosityLaw(v["law.variant"], q=v["law.q"], m0=v["law.m0"], sigma=v["law.sigma"])

    def grid(self) -> Grid:
        return Grid(self.values["dimension"], self.values["grid.n"], self.values["grid.L"])

    def sampler(self) -> GaussianBump:
        v = self.values
        if v["sampler.kind"] != "gaussian_bump":
            raise ConfigError(f"sampler.kind: unknown sampler {v['sampler.kind']!r}")
        d = v["dimension"]
        kw = {}
        if "sampler.x_center" in v and v["sampler.x_center"] != "":
            c = v["sampler.x_center"]
            kw["x_center"] = tuple(c) if isinstance(c, list) else (float(c),) * d
        if "sampler.v_mean" in v and v["sampler.v_mean"] != "":
            m = v["sampler.v_mean"]
            kw["v_mean"] = tuple(m) if isinstance(m, list) else (float(m),) * d
        return GaussianBump(
            d=d,
            L=v["grid.L"],
            mass=v["sampler.mass"],
            x_sigma=v["sampler.x_sigma"],
            v_sigma=v["sampler.v_sigma"],
            **kw,
        )

    def initial_velocity(self) -> VectorField:
        v = self.values
        grid = self.grid()
        kind = v["u0.kind"]
        if kind == "zero":
            return VectorField.zeros(grid)
        if kind == "constant":
            vals = np.zeros((grid.d,) + grid.shape)
            c = v.get("u0.value", v["u0.amplitude"])
            c = c if isinstance(c, list) else [c] * grid.d
            for a in range(grid.d):
                vals[a] += float(c[a])
            return VectorField(grid, vals)
        if kind == "single_mode":
            comp = int(v["u0.component"])
            axis = int(v["u0.mode_axis"])
            if axis < 0:
                axis = (comp + 1) % grid.d if grid.d > 1 else 0
            coords = grid.meshgrid()
            vals = np.zeros((grid.d,) + grid.shape)
            vals[comp] = v["u0.amplitude"] * np.sin(2.0 * math.pi * coords[axis] / grid.L)
            return leray_project(VectorField(grid, vals))
        raise ConfigError(f"u0.kind: unknown kind {kind!r}")


def load_config(path) -> RunConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return RunConfig(parse_config_text(fh.read()))
