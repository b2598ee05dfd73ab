"""Wasserstein-2 machinery for phase-space measures.

Small instances are solved exactly through the assignment problem; at
scale the index-matched coupling of two same-seed particle runs provides
a certified upper bound, which is the side of the stability inequality
that needs controlling anyway.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.optimize import linear_sum_assignment

from .fields import grad_linf, l2_norm_sq, sobolev_norm
from .vlasov import ParticleCloud, ParticleTrajectory, density_rho, interpolate_vector

MAX_EXACT_POINTS = 512
MAX_EXPANDED_POINTS = 4096


class MeasureSizeError(ValueError):
    """Instance too large for the exact assignment route."""


class CouplingMismatchError(ValueError):
    """Trajectories do not share initial sampling, so index matching is invalid."""


@dataclass
class DiscreteMeasure:
    """Weighted point masses in phase space, normalized to total mass one."""

    points: np.ndarray  # (N, m)
    weights: np.ndarray  # (N,)

    def __post_init__(self):
        if self.points.ndim != 2 or self.weights.shape != (self.points.shape[0],):
            raise ValueError("points must be (N, m) with matching weights (N,)")
        if np.any(self.weights < 0):
            raise ValueError("weights must be nonnegative")
        total = float(self.weights.sum())
        if not math.isclose(total, 1.0, rel_tol=0, abs_tol=1e-9):
            raise ValueError("weights must sum to one (normalize the measure first)")

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @classmethod
    def from_cloud(cls, cloud: ParticleCloud) -> "DiscreteMeasure":
        pts = np.concatenate([cloud.x, cloud.v], axis=1)
        return cls(pts, cloud.w / cloud.mass)


@dataclass
class TransportPlan:
    """Sparse coupling between two discrete measures."""

    pairs: list = field(default_factory=list)  # (i, j, mass)

    def cost(self, a: DiscreteMeasure, b: DiscreteMeasure) -> float:
        total = 0.0
        for i, j, m in self.pairs:
            total += m * float(np.sum((a.points[i] - b.points[j]) ** 2))
        return total

    def marginal_error(self, a: DiscreteMeasure, b: DiscreteMeasure) -> float:
        row = np.zeros(a.n)
        col = np.zeros(b.n)
        for i, j, m in self.pairs:
            row[i] += m
            col[j] += m
        return float(max(np.max(np.abs(row - a.weights)), np.max(np.abs(col - b.weights))))


def _expand_to_equal_weights(measure: DiscreteMeasure, max_points: int):
    """Split rational weights into equal-mass copies for the assignment route."""
    fracs = [Fraction(w).limit_denominator(10**6) for w in measure.weights]
    if abs(float(sum(fracs)) - 1.0) > 1e-9:
        raise ValueError("weights are not rational enough to expand exactly")
    denom = 1
    for f in fracs:
        denom = denom * f.denominator // math.gcd(denom, f.denominator)
    counts = [int(f * denom) for f in fracs]
    total = sum(counts)
    if total > max_points:
        raise MeasureSizeError(f"weight expansion needs {total} points (cap {max_points})")
    index = np.repeat(np.arange(measure.n), counts)
    return measure.points[index], index, denom


def w2_exact(a: DiscreteMeasure, b: DiscreteMeasure) -> tuple:
    """Exact W2 distance and an optimal plan (assignment algorithm).

    Equal-weight instances map directly to an assignment problem; unequal
    rational weights are expanded by particle splitting first.
    """
    if a.n > MAX_EXACT_POINTS or b.n > MAX_EXACT_POINTS:
        raise MeasureSizeError(f"exact solver capped at {MAX_EXACT_POINTS} points")
    equal_a = np.allclose(a.weights, 1.0 / a.n, atol=1e-12)
    equal_b = np.allclose(b.weights, 1.0 / b.n, atol=1e-12)
    if equal_a and equal_b and a.n == b.n:
        pa, ia, denom = a.points, np.arange(a.n), a.n
        pb, ib = b.points, np.arange(b.n)
    else:
        pa, ia, da = _expand_to_equal_weights(a, MAX_EXPANDED_POINTS)
        pb, ib, db = _expand_to_equal_weights(b, MAX_EXPANDED_POINTS)
        denom = da * db // math.gcd(da, db)
        pa = np.repeat(pa, denom // da, axis=0)
        ia = np.repeat(ia, denom // da)
        pb = np.repeat(pb, denom // db, axis=0)
        ib = np.repeat(ib, denom // db)
        if len(pa) != len(pb):
            raise ValueError("expanded measures have different sizes; weights not rational")
        if len(pa) > MAX_EXPANDED_POINTS:
            raise MeasureSizeError(f"common expansion needs {len(pa)} points")
    cost = ((pa[:, None, :] - pb[None, :, :]) ** 2).sum(axis=2)
    rows, cols = linear_sum_assignment(cost)
    mass = 1.0 / len(pa)
    merged: dict = {}
    for r, c in zip(rows, cols):
        key = (int(ia[r]), int(ib[c]))
        merged[key] = merged.get(key, 0.0) + mass
    plan = TransportPlan([(i, j, m) for (i, j), m in sorted(merged.items())])
    dist = math.sqrt(float(cost[rows, cols].sum()) * mass)
    return dist, plan


def w2_brute_force(a: DiscreteMeasure, b: DiscreteMeasure) -> float:
    """Minimum over all permutations; only for tiny equal-weight instances."""
    import itertools

    if a.n != b.n or a.n > 8:
        raise MeasureSizeError("brute force limited to equal sizes <= 8")
    cost = ((a.points[:, None, :] - b.points[None, :, :]) ** 2).sum(axis=2)
    best = math.inf
    for perm in itertools.permutations(range(a.n)):
        best = min(best, sum(cost[i, p] for i, p in enumerate(perm)))
    return math.sqrt(best / a.n)


def _check_same_sampling(traj_a: ParticleTrajectory, traj_b: ParticleTrajectory):
    ca, cb = traj_a.initial, traj_b.initial
    if ca.n != cb.n:
        raise CouplingMismatchError("particle counts differ")
    if traj_a.seed is not None and traj_b.seed is not None and traj_a.seed != traj_b.seed:
        raise CouplingMismatchError("sampling seeds differ")
    if not (np.array_equal(ca.x, cb.x) and np.array_equal(ca.v, cb.v)):
        raise CouplingMismatchError("initial clouds differ; index matching is not a coupling")


def w2_coupled_upper(traj_a: ParticleTrajectory, traj_b: ParticleTrajectory) -> tuple:
    """Index-matched upper bound U(t) >= W2(f1(t), f2(t)) on shared times."""
    _check_same_sampling(traj_a, traj_b)
    if traj_a.times != traj_b.times:
        raise CouplingMismatchError("output times differ")
    mass = traj_a.initial.mass
    times = np.array(traj_a.times)
    out = np.empty_like(times)
    for k, (ca, cb) in enumerate(zip(traj_a.clouds, traj_b.clouds)):
        dx = ca.x - cb.x
        dv = ca.v - cb.v
        out[k] = math.sqrt(float(np.sum(ca.w * (np.sum(dx**2, axis=1) + np.sum(dv**2, axis=1)))) / mass)
    return times, out


@dataclass
class StabilityReport:
    """Coupled-bound functional against both Gronwall envelopes."""

    times: np.ndarray
    Q_upper: np.ndarray
    rhs_proof: np.ndarray
    rhs_display: np.ndarray
    margins: np.ndarray
    passed: bool
    min_margin: float


def stability_bound_check(
    traj_a: ParticleTrajectory,
    traj_b: ParticleTrajectory,
    u1_at,
    u2_at,
    grid,
    tol: float = 1e-9,
) -> StabilityReport:
    """Verify the transport stability inequality along two same-seed runs.

    Q(t) = U(t)^2 / 2 from the index coupling is compared with the Gronwall
    envelope int_0^t h(s) exp(int_s^t g) ds, where g = 2 + max|grad u2|^2
    and h = max(rho1) * ||u1 - u2||_L2^2, all measured discretely.  The
    looser closed-form envelope with the sup-in-time drift norm is reported
    alongside.
    """
    times, U = w2_coupled_upper(traj_a, traj_b)
    Q = 0.5 * U**2
    mass = traj_a.initial.mass
    g_vals = np.empty_like(times)
    h_vals = np.empty_like(times)
    u2_h3_sup = 0.0
    rho1_sup = 0.0
    for k, t in enumerate(times):
        u1 = u1_at(t)
        u2 = u2_at(t)
        rho1 = density_rho(traj_a.clouds[k], grid) / mass
        rho1_max = float(np.max(rho1))
        rho1_sup = max(rho1_sup, rho1_max)
        diff = u1.values - u2.values
        g_vals[k] = 2.0 + grad_linf(u2) ** 2
        h_vals[k] = rho1_max * l2_norm_sq(grid, diff)
        u2_h3_sup = max(u2_h3_sup, sobolev_norm(u2, 3))
    # cumulative integral of g, then the Duhamel sum by trapezoid
    Gcum = np.concatenate([[0.0], np.cumsum(0.5 * (g_vals[1:] + g_vals[:-1]) * np.diff(times))])
    integrand = h_vals * np.exp(-Gcum)
    inner = np.concatenate([[0.0], np.cumsum(0.5 * (integrand[1:] + integrand[:-1]) * np.diff(times))])
    rhs_proof = np.exp(Gcum) * inner
    l2diff_cum = np.concatenate(
        [[0.0], np.cumsum(0.5 * ((h_vals / np.maximum(rho1_sup, 1e-300))[1:]
                                 + (h_vals / np.maximum(rho1_sup, 1e-300))[:-1]) * np.diff(times))]
    )
    rhs_display = np.exp((2.0 + u2_h3_sup**2) * times) * rho1_sup * l2diff_cum
    scale = max(float(np.max(rhs_proof)), 1e-300)
    margins = rhs_proof * (1.0 + tol) - Q + tol * scale
    return StabilityReport(
        times=times,
        Q_upper=Q,
        rhs_proof=rhs_proof,
        rhs_display=rhs_display,
        margins=margins,
        passed=bool(np.all(margins >= 0.0)),
        min_margin=float(np.min(margins)),
    )


def metric_derivative_check(traj_a, traj_b, u1_at, u2_at, tol: float = 1e-6) -> tuple:
    """Discrete dQ/dt against the coupling integrand of the derivative bound.

    On the index coupling the derivative bound is an identity along exact
    characteristics, so the trapezoid-averaged integrand must dominate the
    difference quotient up to quadrature error.  Returns
    (worst_violation, scale); a pass is worst_violation <= tol * scale.
    """
    times, U = w2_coupled_upper(traj_a, traj_b)
    Q = 0.5 * U**2
    mass = traj_a.initial.mass
    scale = max(float(np.max(Q)), 1e-30)

    def eval_u(u_at, t, x):
        u = u_at(t)
        return interpolate_vector(u, x) if hasattr(u, "grid") else np.asarray(u(x))

    integrand = np.empty_like(times)
    for k, t in enumerate(times):
        ca, cb = traj_a.clouds[k], traj_b.clouds[k]
        ua = eval_u(u1_at, t, ca.x)
        ub = eval_u(u2_at, t, cb.x)
        dx = ca.x - cb.x
        dv = ca.v - cb.v
        integrand[k] = (
            np.sum(ca.w * (np.sum(dv * dx, axis=1) + np.sum((ua - ub - dv) * dv, axis=1))) / mass
        )
    worst = -math.inf
    for k in range(len(times) - 1):
        dQ = (Q[k + 1] - Q[k]) / (times[k + 1] - times[k])
        worst = max(worst, dQ - 0.5 * (integrand[k] + integrand[k + 1]))
    return worst, scale
