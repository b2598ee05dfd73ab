"""Kinetic transport by characteristics.

The linear kinetic equation with frozen drift ubar,

    df/dt + v . grad_x f + div_v[(ubar - v) f] = 0,

is solved along the characteristic ODE dX/dt = V, dV/dt = ubar(t, X) - V.
Two representations of f are supported: weighted particle clouds (any
dimension, positions integrated unwrapped so displacement bounds stay
meaningful) and a tensor-product (x, v) phase grid in one dimension, where
derivative-weighted norms are computable.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate
from scipy.special import ndtri
from scipy.stats import qmc

from .fields import Grid, VectorField


class SupportEscapeError(RuntimeError):
    """Phase-grid support reached the velocity boundary (V_max too small)."""


@dataclass(frozen=True)
class FlowMapConfig:
    """Time stepping for the characteristic ODE."""

    dt: float
    integrator: str = "rk4"
    u_interp: str = "cubic"

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.integrator != "rk4":
            raise ValueError("only the rk4 integrator is supported")
        if self.u_interp not in ("linear", "cubic"):
            raise ValueError("u_interp must be 'linear' or 'cubic'")


@dataclass
class ParticleCloud:
    """Weighted phase-space samples; positions are kept unwrapped."""

    x: np.ndarray  # (N, d)
    v: np.ndarray  # (N, d)
    w: np.ndarray  # (N,)

    def __post_init__(self):
        if self.x.ndim != 2 or self.x.shape != self.v.shape or self.w.shape != (self.x.shape[0],):
            raise ValueError("cloud arrays must be x (N,d), v (N,d), w (N,)")
        if np.any(self.w < 0):
            raise ValueError("weights must be nonnegative")

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def d(self) -> int:
        return self.x.shape[1]

    @property
    def mass(self) -> float:
        return float(self.w.sum())

    def copy(self) -> "ParticleCloud":
        return ParticleCloud(self.x.copy(), self.v.copy(), self.w.copy())

    def wrapped_x(self, L: float) -> np.ndarray:
        return np.mod(self.x, L)


# ---------------------------------------------------------------------------
# interpolation and deposition on periodic grids
# ---------------------------------------------------------------------------


def _cubic_axis_weights(t: np.ndarray) -> list:
    """Lagrange cubic weights at offsets (-1, 0, 1, 2) for t in [0, 1)."""
    return [
        -t * (t - 1.0) * (t - 2.0) / 6.0,
        (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0,
        -(t + 1.0) * t * (t - 2.0) / 2.0,
        (t + 1.0) * t * (t - 1.0) / 6.0,
    ]


def _linear_axis_weights(t: np.ndarray) -> list:
    return [1.0 - t, t]


def interpolate_vector(u: VectorField, x: np.ndarray, method: str = "cubic") -> np.ndarray:
    """Evaluate a grid vector field at particle positions (periodic)."""
    grid = u.grid
    s = np.mod(x, grid.L) / grid.h
    base = np.floor(s).astype(int)
    frac = s - base
    if method == "linear":
        offsets, weights = (0, 1), [_linear_axis_weights(frac[:, a]) for a in range(grid.d)]
    else:
        offsets, weights = (-1, 0, 1, 2), [_cubic_axis_weights(frac[:, a]) for a in range(grid.d)]
    out = np.zeros((x.shape[0], grid.d))
    for combo in itertools.product(range(len(offsets)), repeat=grid.d):
        idx = tuple(np.mod(base[:, a] + offsets[c], grid.n) for a, c in enumerate(combo))
        wgt = np.ones(x.shape[0])
        for a, c in enumerate(combo):
            wgt = wgt * weights[a][c]
        out += wgt[:, None] * u.values[(slice(None),) + idx].T
    return out


def deposit_cic(grid: Grid, x: np.ndarray, quantities: np.ndarray) -> np.ndarray:
    """Cloud-in-cell deposit of per-particle quantities onto the grid.

    ``quantities`` is (N,) or (N, m); the result is divided by the cell
    volume so that cell_volume * sum(field) reproduces sum(quantities)
    exactly (the hat kernel is a partition of unity).
    """
    q = np.atleast_2d(quantities.T).T  # (N, m)
    s = np.mod(x, grid.L) / grid.h
    base = np.floor(s).astype(int)
    frac = s - base
    out = np.zeros((q.shape[1],) + grid.shape)
    for combo in itertools.product((0, 1), repeat=grid.d):
        idx = tuple(np.mod(base[:, a] + c, grid.n) for a, c in enumerate(combo))
        wgt = np.ones(x.shape[0])
        for a, c in enumerate(combo):
            wgt = wgt * (frac[:, a] if c else 1.0 - frac[:, a])
        for m in range(q.shape[1]):
            np.add.at(out[m], idx, wgt * q[:, m])
    out /= grid.cell_volume
    return out[0] if quantities.ndim == 1 else out


# ---------------------------------------------------------------------------
# characteristics
# ---------------------------------------------------------------------------


def _drift_eval(drift, x: np.ndarray, interp: str) -> np.ndarray:
    if isinstance(drift, VectorField):
        vals = interpolate_vector(drift, x, method=interp)
    else:
        vals = np.asarray(drift(x))
    if not np.all(np.isfinite(vals)):
        raise ValueError("drift field evaluated to a non-finite value")
    return vals


def advance_characteristics(x, v, drift_at, t0: float, t1: float, cfg: FlowMapConfig):
    """RK4 integration of dX/dt = V, dV/dt = ubar(t, X) - V from t0 to t1.

    ``drift_at(t)`` returns either a VectorField (interpolated per
    ``cfg.u_interp``) or a callable acting on an (N, d) position array.
    Backward integration (t1 < t0) is supported for semi-Lagrangian feet.
    """
    x = np.array(x, dtype=float)
    v = np.array(v, dtype=float)
    span = t1 - t0
    if span == 0.0:
        return x, v
    nsteps = max(1, int(math.ceil(abs(span) / cfg.dt - 1e-12)))
    h = span / nsteps
    t = t0
    for _ in range(nsteps):
        u1 = _drift_eval(drift_at(t), x, cfg.u_interp)
        k1x, k1v = v, u1 - v
        u2 = _drift_eval(drift_at(t + 0.5 * h), x + 0.5 * h * k1x, cfg.u_interp)
        k2x, k2v = v + 0.5 * h * k1v, u2 - (v + 0.5 * h * k1v)
        u3 = _drift_eval(drift_at(t + 0.5 * h), x + 0.5 * h * k2x, cfg.u_interp)
        k3x, k3v = v + 0.5 * h * k2v, u3 - (v + 0.5 * h * k2v)
        u4 = _drift_eval(drift_at(t + h), x + h * k3x, cfg.u_interp)
        k4x, k4v = v + h * k3v, u4 - (v + h * k3v)
        x = x + (h / 6.0) * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
        v = v + (h / 6.0) * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
        t += h
    return x, v


@dataclass
class ParticleTrajectory:
    """Snapshots of a particle cloud along a transport run."""

    times: list = field(default_factory=list)
    clouds: list = field(default_factory=list)
    seed: int | None = None

    def append(self, t: float, cloud: ParticleCloud):
        self.times.append(float(t))
        self.clouds.append(cloud.copy())

    @property
    def initial(self) -> ParticleCloud:
        return self.clouds[0]

    @property
    def final(self) -> ParticleCloud:
        return self.clouds[-1]


def solve_vlasov_particles(
    cloud0: ParticleCloud,
    drift_at,
    T: float,
    cfg: FlowMapConfig,
    every: int = 1,
    seed: int | None = None,
) -> ParticleTrajectory:
    """Push the whole cloud through the characteristic flow; weights never change."""
    traj = ParticleTrajectory(seed=seed)
    traj.append(0.0, cloud0)
    if cloud0.n == 0 or T == 0.0:
        return traj
    nsteps = max(1, int(round(T / cfg.dt)))
    dt = T / nsteps
    x, v = cloud0.x, cloud0.v
    for step in range(1, nsteps + 1):
        x, v = advance_characteristics(x, v, drift_at, (step - 1) * dt, step * dt, cfg)
        if step % every == 0 or step == nsteps:
            traj.append(step * dt, ParticleCloud(x, v, cloud0.w))
    return traj


@dataclass
class BoundsReport:
    """Worst-case margins for the speed and displacement estimates."""

    passed: bool
    speed_violation: float
    displacement_violation: float
    worst_speed_particle: int
    worst_displacement_particle: int


def flow_bounds_check(traj: ParticleTrajectory, M_bound: float, tol: float = 1e-6) -> BoundsReport:
    """Check |V(t)| <= max(M, |v0|) and |X(t)-x0| <= (t-t0) max(M, |v0|)."""
    v0 = np.linalg.norm(traj.initial.v, axis=1)
    x0 = traj.initial.x
    cap = np.maximum(M_bound, v0)
    t0 = traj.times[0]
    speed_viol = np.full(v0.shape, -np.inf)
    disp_viol = np.full(v0.shape, -np.inf)
    for t, cloud in zip(traj.times, traj.clouds):
        speeds = np.linalg.norm(cloud.v, axis=1)
        speed_viol = np.maximum(speed_viol, speeds - cap)
        disp = np.linalg.norm(cloud.x - x0, axis=1)
        disp_viol = np.maximum(disp_viol, disp - (t - t0) * cap)
    i_s = int(np.argmax(speed_viol))
    i_d = int(np.argmax(disp_viol))
    return BoundsReport(
        passed=bool(speed_viol[i_s] <= tol and disp_viol[i_d] <= tol),
        speed_violation=float(speed_viol[i_s]),
        displacement_violation=float(disp_viol[i_d]),
        worst_speed_particle=i_s,
        worst_displacement_particle=i_d,
    )


def phase_jacobian_determinant(x0, v0, drift_at, t0, t1, cfg, eps: float = 1e-5) -> float:
    """Finite-difference determinant of the full (x, v) -> (X, V) flow Jacobian.

    The phase-space velocity field (v, ubar - v) has divergence -d, so the
    exact determinant is exp(-d (t1 - t0)).
    """
    x0 = np.asarray(x0, dtype=float).reshape(1, -1)
    v0 = np.asarray(v0, dtype=float).reshape(1, -1)
    d = x0.shape[1]
    m = 2 * d
    states = np.tile(np.concatenate([x0, v0], axis=1), (2 * m + 1, 1))
    for j in range(m):
        states[1 + 2 * j, j] += eps
        states[2 + 2 * j, j] -= eps
    X, V = advance_characteristics(states[:, :d], states[:, d:], drift_at, t0, t1, cfg)
    out = np.concatenate([X, V], axis=1)
    jac = np.empty((m, m))
    for j in range(m):
        jac[:, j] = (out[1 + 2 * j] - out[2 + 2 * j]) / (2.0 * eps)
    return float(np.linalg.det(jac))


# ---------------------------------------------------------------------------
# phase grid (d = 1)
# ---------------------------------------------------------------------------


@dataclass
class PhaseGrid:
    """Tensor-product (x, v) grid values of f for one spatial dimension."""

    n_x: int
    n_v: int
    L: float
    V_max: float
    f: np.ndarray  # (n_x, n_v), nonnegative

    def __post_init__(self):
        if self.f.shape != (self.n_x, self.n_v):
            raise ValueError("f must have shape (n_x, n_v)")

    @property
    def h_x(self) -> float:
        return self.L / self.n_x

    @property
    def h_v(self) -> float:
        return 2.0 * self.V_max / (self.n_v - 1)

    @property
    def xs(self) -> np.ndarray:
        return np.arange(self.n_x) * self.h_x

    @property
    def vs(self) -> np.ndarray:
        return np.linspace(-self.V_max, self.V_max, self.n_v)

    @property
    def mass(self) -> float:
        return float(self.f.sum() * self.h_x * self.h_v)

    def copy(self) -> "PhaseGrid":
        return PhaseGrid(self.n_x, self.n_v, self.L, self.V_max, self.f.copy())

    def rho(self) -> np.ndarray:
        return self.f.sum(axis=1) * self.h_v

    def momentum_density(self) -> np.ndarray:
        return (self.f * self.vs[None, :]).sum(axis=1) * self.h_v

    def m2(self) -> np.ndarray:
        return (self.f * self.vs[None, :] ** 2).sum(axis=1) * self.h_v


def _interp_phase(pg: PhaseGrid, xf: np.ndarray, vf: np.ndarray) -> np.ndarray:
    """Cubic interpolation of f at foot points: periodic in x, zero beyond V_max."""
    sx = np.mod(xf, pg.L) / pg.h_x
    bx = np.floor(sx).astype(int)
    wx = _cubic_axis_weights(sx - bx)
    sv = (vf + pg.V_max) / pg.h_v
    bv = np.floor(sv).astype(int)
    wv = _cubic_axis_weights(sv - bv)
    out = np.zeros_like(xf)
    for a in range(4):
        ix = np.mod(bx + a - 1, pg.n_x)
        for b in range(4):
            iv = bv + b - 1
            valid = (iv >= 0) & (iv < pg.n_v)
            vals = np.where(valid, pg.f[ix, np.clip(iv, 0, pg.n_v - 1)], 0.0)
            out += wx[a] * wv[b] * vals
    return out


@dataclass
class PhaseGridTrajectory:
    times: list = field(default_factory=list)
    grids: list = field(default_factory=list)
    clipped_mass: float = 0.0

    def append(self, t: float, pg: PhaseGrid):
        self.times.append(float(t))
        self.grids.append(pg.copy())

    @property
    def final(self) -> PhaseGrid:
        return self.grids[-1]


def _edge_fraction(f: np.ndarray) -> float:
    peak = float(np.max(f))
    if peak == 0.0:
        return 0.0
    return float(max(np.max(f[:, :2]), np.max(f[:, -2:])) / peak)


def semi_lagrangian_step(
    pg: PhaseGrid,
    drift_at,
    t_from: float,
    t_to: float,
    cfg: FlowMapConfig,
    edge0: float = 0.0,
) -> tuple:
    """One backward-characteristics step of the phase-grid transport.

    Nodes are traced back from t_to to t_from, f is evaluated at the feet
    by cubic interpolation (periodic in x, zero beyond V_max) and scaled by
    the phase-volume factor exp(t_to - t_from).  Returns the new grid and
    the mass clipped from negative interpolants.
    """
    X, V = np.meshgrid(pg.xs, pg.vs, indexing="ij")
    xf, vf = advance_characteristics(
        X.reshape(-1, 1), V.reshape(-1, 1), drift_at, t_to, t_from, cfg
    )
    f = (_interp_phase(pg, xf[:, 0], vf[:, 0]) * math.exp(t_to - t_from)).reshape(pg.n_x, pg.n_v)
    neg = f < 0.0
    clipped = float(-f[neg].sum() * pg.h_x * pg.h_v)
    f[neg] = 0.0
    new = PhaseGrid(pg.n_x, pg.n_v, pg.L, pg.V_max, f)
    if _edge_fraction(f) > max(1e-6, 4.0 * edge0):
        raise SupportEscapeError(
            "phase-space support reached the velocity boundary; increase V_max"
        )
    return new, clipped


def solve_vlasov_grid(
    pg0: PhaseGrid,
    drift_at,
    T: float,
    cfg: FlowMapConfig,
    every: int = 1,
) -> PhaseGridTrajectory:
    """Semi-Lagrangian solve on the (x, v) grid, one spatial dimension.

    Each step traces nodes backward along the characteristics, evaluates f
    at the feet by cubic interpolation and multiplies by exp(dt) (the
    phase-volume factor in d = 1).  Negative interpolants are clipped to
    zero and the clipped mass is tracked.
    """
    traj = PhaseGridTrajectory()
    traj.append(0.0, pg0)
    if T == 0.0:
        return traj
    edge0 = _edge_fraction(pg0.f)
    nsteps = max(1, int(round(T / cfg.dt)))
    dt = T / nsteps
    cur = pg0.copy()
    for step in range(1, nsteps + 1):
        t_new = step * dt
        cur, clipped = semi_lagrangian_step(cur, drift_at, t_new - dt, t_new, cfg, edge0)
        traj.clipped_mass += clipped
        if step % every == 0 or step == nsteps:
            traj.append(t_new, cur)
    return traj


# ---------------------------------------------------------------------------
# moments and drag force
# ---------------------------------------------------------------------------


def density_rho(f, grid: Grid) -> np.ndarray:
    """Spatial density on the grid: CIC deposit (cloud) or v-quadrature (grid)."""
    if isinstance(f, ParticleCloud):
        if f.n == 0:
            return np.zeros(grid.shape)
        return deposit_cic(grid, f.x, f.w)
    if grid.d != 1 or f.n_x != grid.n or abs(f.L - grid.L) > 1e-12:
        raise ValueError("phase grid must match the spatial grid in d = 1")
    return f.rho()


def moments(f, grid: Grid, u_field: VectorField, kappa: float = 3.0):
    """Density, momentum density and drag force F = -kappa (u rho - j)."""
    if kappa <= 0:
        raise ValueError("drag coefficient kappa must be positive")
    if isinstance(f, ParticleCloud):
        if f.n == 0:
            rho = np.zeros(grid.shape)
            j = np.zeros((grid.d,) + grid.shape)
        else:
            per_particle = np.concatenate([f.w[:, None], f.w[:, None] * f.v], axis=1)
            fields = deposit_cic(grid, f.x, per_particle)
            rho, j = fields[0], fields[1:]
    else:
        rho = density_rho(f, grid)
        j = f.momentum_density()[None, :]
    F = -kappa * (u_field.values * rho[None] - j)
    return rho, j, VectorField(grid, F)


def momentum_exchange_two_ways(cloud: ParticleCloud, grid: Grid, u_field: VectorField, kappa: float):
    """Total drag computed from the field and from the particle sum.

    The particle sum interpolates u with the same multilinear kernel used
    for deposits, which makes the two bookkeepings agree to rounding.
    """
    _, _, F = moments(cloud, grid, u_field, kappa)
    field_total = F.values.reshape(grid.d, -1).sum(axis=1) * grid.cell_volume
    u_at = interpolate_vector(u_field, cloud.x, method="linear")
    particle_total = -kappa * np.sum(cloud.w[:, None] * (u_at - cloud.v), axis=0)
    return field_total, particle_total


# ---------------------------------------------------------------------------
# weighted norms (d = 1 phase grid)
# ---------------------------------------------------------------------------


def _phase_derivatives(pg: PhaseGrid):
    f = pg.f
    fx = (np.roll(f, -1, axis=0) - np.roll(f, 1, axis=0)) / (2.0 * pg.h_x)
    fxx = (np.roll(f, -1, axis=0) - 2.0 * f + np.roll(f, 1, axis=0)) / pg.h_x**2
    fv = np.gradient(f, pg.h_v, axis=1, edge_order=2)
    fvv = np.gradient(fv, pg.h_v, axis=1, edge_order=2)
    fxv = np.gradient(fx, pg.h_v, axis=1, edge_order=2)
    return f, fx, fv, fxx, fxv, fvv


def weighted_norm_X(pg: PhaseGrid, k: int) -> float:
    """Discrete X(t): (1 + |v|^{2k}) against squares of f and its derivatives."""
    f, fx, fv, fxx, fxv, fvv = _phase_derivatives(pg)
    weight = 1.0 + np.abs(pg.vs) ** (2 * k)
    dens = f**2 + fx**2 + fv**2 + fxv**2 + fxx**2 + fvv**2
    return float(np.sum(weight[None, :] * dens) * pg.h_x * pg.h_v)


def weighted_data_norm(pg: PhaseGrid, k: int) -> float:
    """Sum of squared L^2 norms of (1 + |v|^k) d^a_v d^b_x f, orders <= 2."""
    f, fx, fv, fxx, fxv, fvv = _phase_derivatives(pg)
    weight = (1.0 + np.abs(pg.vs) ** k) ** 2
    dens = f**2 + fx**2 + fv**2 + fxv**2 + fxx**2 + fvv**2
    return float(np.sum(weight[None, :] * dens) * pg.h_x * pg.h_v)


# ---------------------------------------------------------------------------
# density bound of the flow-map representation
# ---------------------------------------------------------------------------

_UNIT_BALL_VOLUME = {1: 2.0, 2: math.pi, 3: 4.0 * math.pi / 3.0}
_UNIT_SPHERE_AREA = {1: 2.0, 2: 2.0 * math.pi, 3: 4.0 * math.pi}


@dataclass(frozen=True)
class F0Params:
    """Envelope data of the initial density: sup f0, decay exponent and constant."""

    linf: float
    p: float
    c2: float
    mass: float


def _radial_tail(p: float, R: float, d: int, power: int = 0) -> float:
    """Integral of |v|^power / (1 + |v|^p) over {|v| >= R} in d dimensions."""
    val, _ = integrate.quad(lambda r: r ** (d - 1 + power) / (1.0 + r**p), R, np.inf)
    return _UNIT_SPHERE_AREA[d] * val


def rho_envelope(params: F0Params, M_bound: float, d: int, t: float) -> float:
    """Upper envelope for max_x rho(t, x) from the flow-map representation."""
    R = max(M_bound, 1e-12)
    const = _UNIT_BALL_VOLUME[d] * params.linf * R**d + params.c2 * _radial_tail(params.p, R, d)
    return const * math.exp(d * t)


def m2_envelope(params: F0Params, M_bound: float, d: int, t: float) -> float:
    """Upper envelope for max_x of the second velocity moment."""
    R = max(M_bound, 1e-12)
    const = _UNIT_SPHERE_AREA[d] * params.linf * R ** (d + 2) / (d + 2.0)
    const += params.c2 * _radial_tail(params.p, R, d, power=2)
    return const * math.exp(d * t)


@dataclass
class RhoBoundReport:
    passed: bool
    worst_margin: float      # min over times of envelope*(1+tol) - measured
    worst_time: float
    m2_passed: bool | None = None
    m2_worst_margin: float | None = None


def rho_bound_check(
    times,
    rho_max,
    params: F0Params,
    M_bound: float,
    d: int,
    tol: float = 1e-9,
    m2_max=None,
) -> RhoBoundReport:
    """Compare measured density peaks against the growth envelope."""
    times = np.asarray(times, dtype=float)
    rho_max = np.asarray(rho_max, dtype=float)
    margins = np.array([rho_envelope(params, M_bound, d, t) * (1.0 + tol) for t in times]) - rho_max
    i = int(np.argmin(margins))
    report = RhoBoundReport(
        passed=bool(np.all(margins >= 0.0)),
        worst_margin=float(margins[i]),
        worst_time=float(times[i]),
    )
    if m2_max is not None:
        m2_margins = (
            np.array([m2_envelope(params, M_bound, d, t) * (1.0 + tol) for t in times]) - m2_max
        )
        report.m2_passed = bool(np.all(m2_margins >= 0.0))
        report.m2_worst_margin = float(np.min(m2_margins))
    return report


# ---------------------------------------------------------------------------
# initial data
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GaussianBump:
    """Product initial density: wrapped normal in x, Maxwellian in v.

    Used both to sample particle clouds (low-discrepancy Halton sequence,
    reproducible for a given seed) and to fill d = 1 phase grids.
    """

    d: int
    L: float
    mass: float = 1.0
    x_center: tuple = ()
    x_sigma: float = 1.0
    v_mean: tuple = ()
    v_sigma: float = 1.0

    def _centers(self) -> np.ndarray:
        return np.asarray(self.x_center if self.x_center else (self.L / 2.0,) * self.d)

    def _means(self) -> np.ndarray:
        return np.asarray(self.v_mean if self.v_mean else (0.0,) * self.d)

    def sample(self, N: int, seed: int) -> ParticleCloud:
        sampler = qmc.Halton(d=2 * self.d, scramble=True, seed=seed)
        u = np.clip(sampler.random(N), 1e-12, 1.0 - 1e-12)
        z = ndtri(u)
        x = np.mod(self._centers()[None, :] + self.x_sigma * z[:, : self.d], self.L)
        v = self._means()[None, :] + self.v_sigma * z[:, self.d :]
        w = np.full(N, self.mass / N)
        return ParticleCloud(x, v, w)

    def _wrapped_normal(self, x: np.ndarray, c: float) -> np.ndarray:
        out = np.zeros_like(x)
        for m in range(-3, 4):
            out += np.exp(-((x - c + m * self.L) ** 2) / (2.0 * self.x_sigma**2))
        return out / (self.x_sigma * math.sqrt(2.0 * math.pi))

    def density(self, x: np.ndarray, v: np.ndarray) -> np.ndarray:
        """Analytic f0 at phase points; x is (N, d) or broadcastable, v likewise."""
        x = np.atleast_2d(x)
        v = np.atleast_2d(v)
        centers = self._centers()
        means = self._means()
        out = np.full(x.shape[0], self.mass)
        for a in range(self.d):
            out = out * self._wrapped_normal(x[:, a], centers[a])
            out = out * np.exp(-((v[:, a] - means[a]) ** 2) / (2.0 * self.v_sigma**2)) / (
                self.v_sigma * math.sqrt(2.0 * math.pi)
            )
        return out

    def phase_grid(self, n_x: int, n_v: int, V_max: float) -> PhaseGrid:
        if self.d != 1:
            raise ValueError("phase grids are one-dimensional")
        pg = PhaseGrid(n_x, n_v, self.L, V_max, np.zeros((n_x, n_v)))
        X, V = np.meshgrid(pg.xs, pg.vs, indexing="ij")
        f = self.density(X.reshape(-1, 1), V.reshape(-1, 1)).reshape(n_x, n_v)
        return PhaseGrid(n_x, n_v, self.L, V_max, f)

    def f0_params(self, p: float) -> F0Params:
        x_peak = self.mass * (1.0 / (self.x_sigma * math.sqrt(2.0 * math.pi))) ** self.d
        v_norm = (1.0 / (self.v_sigma * math.sqrt(2.0 * math.pi))) ** self.d
        linf = x_peak * v_norm
        mu = float(np.linalg.norm(self._means()))
        r = np.linspace(0.0, mu + 14.0 * self.v_sigma, 20001)
        radial = np.exp(-np.maximum(r - mu, 0.0) ** 2 / (2.0 * self.v_sigma**2))
        c2 = float(np.max((1.0 + r**p) * x_peak * v_norm * radial))
        return F0Params(linf=linf, p=p, c2=c2, mass=self.mass)

    def suggest_v_max(self, margin: float = 1.5) -> float:
        mu = float(np.max(np.abs(self._means()))) if self.d else 0.0
        return margin * (mu + 4.2 * self.v_sigma)
