"""Periodic uniform-grid fields and spectral differential operators.

All derivatives are Fourier-based, so they are exact on band-limited data
and the divergence-free (Leray) projection is an exact projector.  The
domain is the torus [0, L)^d; component axes come first, grid axes last.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .constitutive import PACK_PAIRS, ViscosityLaw, eval_G, eval_G_deriv, pack_weights


class DegenerateFieldError(ValueError):
    """Raised when a check needs shear variation and the field has none."""


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid: d axes, n points per axis, box side L."""

    d: int
    n: int
    L: float

    def __post_init__(self):
        if self.d not in (1, 2, 3):
            raise ValueError("dimension must be 1, 2 or 3")
        if self.n < 8 or (self.n & (self.n - 1)) != 0:
            raise ValueError("points per axis must be a power of two >= 8")
        if self.L <= 0:
            raise ValueError("box side must be positive")

    @property
    def h(self) -> float:
        return self.L / self.n

    @property
    def shape(self) -> tuple:
        return (self.n,) * self.d

    @property
    def cell_volume(self) -> float:
        return self.h**self.d

    def axis_coords(self) -> np.ndarray:
        return np.arange(self.n) * self.h

    def meshgrid(self) -> list:
        return np.meshgrid(*([self.axis_coords()] * self.d), indexing="ij")


class Spectral:
    """Cached wavenumber arrays and FFT helpers for one grid."""

    def __init__(self, grid: Grid):
        self.grid = grid
        k1 = 2.0 * np.pi * np.fft.fftfreq(grid.n, d=grid.h)
        self.k = []
        for a in range(grid.d):
            shape = [1] * grid.d
            shape[a] = grid.n
            self.k.append(k1.reshape(shape))
        self.k2 = sum(ka**2 for ka in self.k)
        if grid.d == 1:
            self.k2 = np.asarray(self.k2)
        inv = np.zeros_like(self.k2)
        nz = self.k2 > 0
        inv[nz] = 1.0 / self.k2[nz]
        self.inv_k2 = inv
        kcut = (2.0 / 3.0) * np.max(np.abs(k1))
        mask = np.ones(grid.shape, dtype=bool)
        for ka in self.k:
            mask &= np.abs(ka) <= kcut + 1e-12
        self.dealias_mask = mask
        self.kmax_dealias = kcut
        # the axis-Nyquist planes cannot carry a Hermitian-symmetric
        # divergence-free projection (the off-diagonal projector entries are
        # odd in k), so the solver state space excludes them
        kny = np.max(np.abs(k1))
        nyfree = np.ones(grid.shape, dtype=bool)
        for ka in self.k:
            nyfree &= np.abs(ka) < kny - 1e-12
        self.nyquist_free = nyfree

    def fft(self, values: np.ndarray) -> np.ndarray:
        return np.fft.fftn(values, axes=range(-self.grid.d, 0))

    def ifft(self, spec: np.ndarray) -> np.ndarray:
        return np.fft.ifftn(spec, axes=range(-self.grid.d, 0)).real

    def deriv(self, values: np.ndarray, axis: int) -> np.ndarray:
        return self.ifft(1j * self.k[axis] * self.fft(values))

    def deriv_tuple(self, values: np.ndarray, axes: tuple) -> np.ndarray:
        spec = self.fft(values)
        for a in axes:
            spec = 1j * self.k[a] * spec
        return self.ifft(spec)


@lru_cache(maxsize=32)
def _spectral_cached(d: int, n: int, L: float) -> Spectral:
    return Spectral(Grid(d, n, L))


def spectral(grid: Grid) -> Spectral:
    return _spectral_cached(grid.d, grid.n, grid.L)


@dataclass
class VectorField:
    """d velocity components sampled on the grid, component axis first."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        expected = (self.grid.d,) + self.grid.shape
        if self.values.shape != expected:
            raise ValueError(f"vector field values must have shape {expected}")

    def copy(self) -> "VectorField":
        return VectorField(self.grid, self.values.copy())

    @classmethod
    def zeros(cls, grid: Grid) -> "VectorField":
        return cls(grid, np.zeros((grid.d,) + grid.shape))


@dataclass
class SymTensorField:
    """Packed symmetric tensor field: diagonals first, then off-diagonals."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        expected = (len(PACK_PAIRS[self.grid.d]),) + self.grid.shape
        if self.values.shape != expected:
            raise ValueError(f"packed tensor field values must have shape {expected}")

    def frobenius_sq(self) -> np.ndarray:
        w = pack_weights(self.grid.d)
        return np.einsum("m...,m->...", self.values * self.values, w)


def tensor_contract(a: SymTensorField, b: SymTensorField) -> np.ndarray:
    """Pointwise A:B for two packed tensor fields."""
    w = pack_weights(a.grid.d)
    return np.einsum("m...,m->...", a.values * b.values, w)


class FieldSeries:
    """Vector-field snapshots with linear interpolation in time."""

    def __init__(self, grid: Grid, times=None, fields=None):
        self.grid = grid
        self.times = [float(t) for t in times] if times else []
        self.values = [f.values.copy() if isinstance(f, VectorField) else np.array(f) for f in fields] if fields else []

    @classmethod
    def constant(cls, u: VectorField, T: float) -> "FieldSeries":
        return cls(u.grid, [0.0, T], [u.values, u.values])

    def append(self, t: float, u: VectorField):
        if self.times and t <= self.times[-1]:
            raise ValueError("snapshot times must be strictly increasing")
        self.times.append(float(t))
        self.values.append(u.values.copy())

    def at(self, t: float) -> VectorField:
        ts = self.times
        if t <= ts[0]:
            return VectorField(self.grid, self.values[0])
        if t >= ts[-1]:
            return VectorField(self.grid, self.values[-1])
        i = int(np.searchsorted(ts, t, side="right")) - 1
        t0, t1 = ts[i], ts[i + 1]
        lam = (t - t0) / (t1 - t0)
        return VectorField(self.grid, (1.0 - lam) * self.values[i] + lam * self.values[i + 1])

    def __len__(self) -> int:
        return len(self.times)


def sym_gradient(u: VectorField) -> SymTensorField:
    """Symmetric part of the velocity gradient, D_ij = (du_i/dx_j + du_j/dx_i)/2."""
    sp = spectral(u.grid)
    d = u.grid.d
    du = [[sp.deriv(u.values[i], a) for a in range(d)] for i in range(d)]
    packed = np.stack([0.5 * (du[i][j] + du[j][i]) for i, j in PACK_PAIRS[d]])
    return SymTensorField(u.grid, packed)


def divergence(u: VectorField) -> np.ndarray:
    sp = spectral(u.grid)
    return sum(sp.deriv(u.values[a], a) for a in range(u.grid.d))


def gradient(values: np.ndarray, grid: Grid) -> np.ndarray:
    """All partials of a scalar field, stacked on a new leading axis."""
    sp = spectral(grid)
    return np.stack([sp.deriv(values, a) for a in range(grid.d)])


def leray_project(u: VectorField) -> VectorField:
    """Remove the gradient part in Fourier space; the mean mode is untouched.

    Axis-Nyquist planes are zeroed: they cannot carry a real
    divergence-free mode, so they are outside the discrete solution space.
    """
    sp = spectral(u.grid)
    spec = sp.fft(u.values) * sp.nyquist_free
    kdot = sum(sp.k[a] * spec[a] for a in range(u.grid.d))
    out = np.stack([spec[a] - sp.k[a] * kdot * sp.inv_k2 for a in range(u.grid.d)])
    return VectorField(u.grid, sp.ifft(out))


def div_sym_tensor(T: SymTensorField) -> VectorField:
    """(div T)_i = sum_j d T_ij / dx_j for a packed symmetric tensor field."""
    grid = T.grid
    sp = spectral(grid)
    d = grid.d
    index = {}
    for m, (i, j) in enumerate(PACK_PAIRS[d]):
        index[(i, j)] = m
        index[(j, i)] = m
    out = np.zeros((d,) + grid.shape)
    for i in range(d):
        for j in range(d):
            out[i] += sp.deriv(T.values[index[(i, j)]], j)
    return VectorField(grid, out)


def l2_norm_sq(grid: Grid, values: np.ndarray) -> float:
    """Exact discrete L^2 norm squared (trapezoid = exact on the torus)."""
    return float(np.sum(values * values) * grid.cell_volume)


def _spectral_weighted_sq(grid: Grid, values: np.ndarray, weight: np.ndarray) -> float:
    sp = spectral(grid)
    spec = sp.fft(values)
    power = np.abs(spec) ** 2
    if values.ndim > grid.d:
        power = power.sum(axis=tuple(range(values.ndim - grid.d)))
    norm = grid.L**grid.d / grid.n ** (2 * grid.d)
    return float(np.sum(weight * power) * norm)


def seminorm_sq(grid: Grid, values: np.ndarray, m: int) -> float:
    """Squared L^2 norm of the m-th full gradient (tensor convention |k|^(2m))."""
    sp = spectral(grid)
    return _spectral_weighted_sq(grid, values, sp.k2**m)


def sobolev_norm(u: VectorField, k: int) -> float:
    """H^k norm: sum of gradient seminorms of orders 0..k, computed spectrally."""
    if not 0 <= k <= 4:
        raise ValueError("Sobolev order must be between 0 and 4")
    sp = spectral(u.grid)
    weight = sum(sp.k2**m for m in range(k + 1))
    return float(np.sqrt(_spectral_weighted_sq(u.grid, u.values, weight)))


def tensor_seminorm_sq(T: SymTensorField, m: int) -> float:
    """Squared norm of the m-th gradient of a packed tensor, off-diagonals doubled."""
    sp = spectral(T.grid)
    w = pack_weights(T.grid.d)
    total = 0.0
    for comp, wc in zip(T.values, w):
        total += wc * _spectral_weighted_sq(T.grid, comp, sp.k2**m)
    return float(total)


def linf(values: np.ndarray, grid: Grid) -> float:
    """Max pointwise Euclidean magnitude over any leading component axes."""
    if values.ndim > grid.d:
        mag = np.sqrt(np.sum(values * values, axis=tuple(range(values.ndim - grid.d))))
    else:
        mag = np.abs(values)
    return float(np.max(mag))


def grad_linf(u: VectorField) -> float:
    """Max pointwise Frobenius norm of the full velocity gradient."""
    sp = spectral(u.grid)
    d = u.grid.d
    g = np.stack([sp.deriv(u.values[i], a) for i in range(d) for a in range(d)])
    return float(np.max(np.sqrt(np.sum(g * g, axis=0))))


def dealias(grid: Grid, values: np.ndarray) -> np.ndarray:
    """Apply the 2/3-rule spectral cutoff to a (product) field."""
    sp = spectral(grid)
    return sp.ifft(sp.dealias_mask * sp.fft(values))


def random_band_limited(
    grid: Grid,
    rng: np.random.Generator,
    kmax: int = 3,
    amplitude: float = 1.0,
    divergence_free: bool = False,
) -> VectorField:
    """Random smooth field with Fourier support |k_a| <= kmax per axis."""
    comps = grid.d
    sp = spectral(grid)
    spec = np.zeros((comps,) + grid.shape, dtype=complex)
    kidx = np.fft.fftfreq(grid.n, d=1.0 / grid.n)
    mask = np.ones(grid.shape, dtype=bool)
    for a in range(grid.d):
        shape = [1] * grid.d
        shape[a] = grid.n
        mask &= np.abs(kidx.reshape(shape)) <= kmax
    nm = int(mask.sum())
    for c in range(comps):
        coeffs = rng.standard_normal(nm) + 1j * rng.standard_normal(nm)
        spec[c][mask] = coeffs
    values = sp.ifft(spec)
    scale = np.max(np.abs(values))
    if scale > 0:
        values *= amplitude / scale
    u = VectorField(grid, values)
    if divergence_free:
        u = leray_project(u)
    return u


def decomposition_residual(law: ViscosityLaw, u: VectorField, order: int) -> tuple:
    """Check the recursive splitting of grid derivatives of G[|Du|^2].

    For each ordered derivative tuple of the requested order, the direct
    spectral derivative of G[|Du|^2] minus 2 (G'[|Du|^2] Du : d^order Du)
    must match the recursively built remainder term.  Returns
    ``(residual, bound_ratio)``: the max-norm mismatch and the largest ratio
    of the remainder against its shear-gradient envelope.
    """
    if order not in (2, 3):
        raise ValueError("decomposition check supports orders 2 and 3")
    grid = u.grid
    sp = spectral(grid)
    d = grid.d
    w = pack_weights(d)

    D = sym_gradient(u)
    s = D.frobenius_sq()
    G = np.asarray(eval_G(law, s))
    G1 = np.asarray(eval_G_deriv(law, s, 1))
    GD = G1[None] * D.values  # G'[|Du|^2] Du, packed

    def contract(a_vals, b_vals):
        return np.einsum("m...,m->...", a_vals * b_vals, w)

    def deriv_packed(vals, axes):
        spec = sp.fft(vals)
        for a in axes:
            spec = 1j * sp.k[a] * spec
        return sp.ifft(spec)

    # shear-gradient envelopes
    gradD = np.stack([deriv_packed(D.values, (a,)) for a in range(d)])
    gradD_mag = np.sqrt(np.einsum("am...,m->...", gradD * gradD, w))
    if np.max(gradD_mag) == 0.0:
        raise DegenerateFieldError("shear gradient vanishes identically; ratio undefined")
    grad2D = np.stack([deriv_packed(D.values, (a, b)) for a in range(d) for b in range(d)])
    grad2D_mag = np.sqrt(np.einsum("am...,m->...", grad2D * grad2D, w))

    floor = 1e-12
    residual = 0.0
    ratio = 0.0
    for axes in itertools.product(range(d), repeat=order):
        dG = sp.deriv_tuple(G, axes)
        dD = deriv_packed(D.values, axes)
        E_num = dG - 2.0 * contract(GD, dD)
        # recursion: E_l = 2 (d_{a_l}(G' Du) : d^{l-1} Du) + d_{a_l} E_{l-1}
        inner, outer = axes[:-1], axes[-1]
        dGD_outer = deriv_packed(GD, (outer,))
        dD_inner = deriv_packed(D.values, inner)
        E_rec = 2.0 * contract(dGD_outer, dD_inner)
        if order == 3:
            b1, b2 = inner
            E2_inner = 2.0 * contract(deriv_packed(GD, (b2,)), deriv_packed(D.values, (b1,)))
            E_rec = E_rec + sp.deriv(E2_inner, outer)
        residual = max(residual, float(np.max(np.abs(E_num - E_rec))))
        if order == 2:
            envelope = G * gradD_mag**2
        else:
            envelope = G * (gradD_mag**3 + grad2D_mag * gradD_mag)
        ratio = max(ratio, float(np.max(np.abs(E_rec) / np.maximum(envelope, floor))))
    return residual, ratio
