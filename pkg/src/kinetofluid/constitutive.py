"""Generalized-Newtonian viscosity laws and their pointwise algebra.

The viscous stress is S(D) = G[|D|^2] D for a scalar law G acting on the
squared shear rate.  Two closed-form families are supported next to the
constant (newtonian) law:

* ``power_law_a``:  G[s] = (m0^(2/(q-2)) + s)^((q-2)/2),  q > 2
* ``power_law_b``:  G[s] = m0 + (sigma + s)^((q-2)/2),    q > 1, sigma > 0

Both keep the viscosity above the floor m0 and satisfy the coercivity
condition G[s] + 2 G'[s] s >= m0, which is what every downstream energy
argument leans on.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

NEWTONIAN = "newtonian"
POWER_LAW_A = "power_law_a"
POWER_LAW_B = "power_law_b"

_VARIANTS = (NEWTONIAN, POWER_LAW_A, POWER_LAW_B)

# Packed storage order for symmetric d x d tensors: diagonal entries first,
# then off-diagonal pairs (i < j).  Off-diagonal entries carry weight 2 in
# contractions.
PACK_PAIRS = {
    1: ((0, 0),),
    2: ((0, 0), (1, 1), (0, 1)),
    3: ((0, 0), (1, 1), (2, 2), (0, 1), (0, 2), (1, 2)),
}


def pack_weights(d: int) -> np.ndarray:
    """Contraction weights for packed symmetric tensors (2 on off-diagonals)."""
    return np.array([1.0 if i == j else 2.0 for i, j in PACK_PAIRS[d]])


@dataclass(frozen=True)
class ViscosityLaw:
    """Parameters of a shear-dependent viscosity law.

    ``m0`` is the viscosity floor; ``sigma`` is the regularization shift of
    the ``power_law_b`` family.  The newtonian variant pins the law to the
    constant 1 and interprets m0 as 1.
    """

    variant: str
    q: float = 2.0
    m0: float = 1.0
    sigma: float = 0.0

    def __post_init__(self):
        if self.variant not in _VARIANTS:
            raise ValueError(f"unknown viscosity variant {self.variant!r}")
        if self.variant == NEWTONIAN:
            object.__setattr__(self, "m0", 1.0)
            return
        if self.m0 <= 0:
            raise ValueError("viscosity floor m0 must be positive")
        if self.variant == POWER_LAW_A and self.q <= 2.0:
            raise ValueError("power_law_a requires q > 2 (q = 2 is the newtonian variant)")
        if self.variant == POWER_LAW_B:
            if self.q <= 1.0:
                raise ValueError("power_law_b requires q > 1")
            if self.sigma <= 0.0:
                raise ValueError("power_law_b requires sigma > 0")

    @property
    def exponent(self) -> float:
        return 0.5 * (self.q - 2.0)

    @property
    def shift(self) -> float:
        """Additive shift inside the power: m0^(2/(q-2)) for family a, sigma for b."""
        if self.variant == POWER_LAW_A:
            return self.m0 ** (2.0 / (self.q - 2.0))
        return self.sigma


@dataclass(frozen=True)
class StressPair:
    """Shear-rate tensor A and perturbation direction B, packed symmetric."""

    d: int
    A: np.ndarray
    B: np.ndarray

    def __post_init__(self):
        m = len(PACK_PAIRS[self.d])
        if self.A.shape[-1] != m or self.B.shape[-1] != m:
            raise ValueError(f"packed symmetric tensors in d={self.d} have {m} components")


def _check_s(s):
    s = np.asarray(s, dtype=float)
    if np.any(s < 0):
        raise ValueError("squared shear rate s must be nonnegative")
    return s


def eval_G(law: ViscosityLaw, s) -> np.ndarray | float:
    """Viscosity G[s]; accepts scalars or arrays of s >= 0."""
    s = _check_s(s)
    if law.variant == NEWTONIAN:
        out = np.ones_like(s)
    elif law.variant == POWER_LAW_A:
        out = (law.shift + s) ** law.exponent
    else:
        out = law.m0 + (law.sigma + s) ** law.exponent
    return out if out.ndim else float(out)


def eval_G_deriv(law: ViscosityLaw, s, order: int = 1) -> np.ndarray | float:
    """Closed-form G'[s] or G''[s]."""
    if order not in (1, 2):
        raise ValueError("only derivative orders 1 and 2 are supported")
    s = _check_s(s)
    if law.variant == NEWTONIAN:
        out = np.zeros_like(s)
    else:
        e = law.exponent
        base = law.shift + s
        if order == 1:
            out = e * base ** (e - 1.0)
        else:
            out = e * (e - 1.0) * base ** (e - 2.0)
    return out if out.ndim else float(out)


def frobenius_sq(d: int, packed: np.ndarray) -> np.ndarray | float:
    """|T|^2 = T:T for a packed symmetric tensor (component axis last)."""
    w = pack_weights(d)
    if packed.ndim > 1:
        return np.einsum("...m,m->...", packed * packed, w)
    return float(np.dot(packed * packed, w))


def tensor_dot(d: int, a: np.ndarray, b: np.ndarray) -> np.ndarray | float:
    """A:B for packed symmetric tensors."""
    w = pack_weights(d)
    if a.ndim > 1 or b.ndim > 1:
        return np.einsum("...m,m->...", a * b, w)
    return float(np.dot(a * b, w))


def eval_stress(law: ViscosityLaw, d: int, D: np.ndarray) -> np.ndarray:
    """Viscous stress S(D) = G[|D|^2] D on packed tensors (pointwise or batched)."""
    s = frobenius_sq(d, D)
    g = eval_G(law, s)
    return np.asarray(g)[..., None] * D if D.ndim > 1 else np.asarray(g) * D


def antiderivative_G(law: ViscosityLaw, s) -> np.ndarray | float:
    """Integral of G from 0 to s, in closed form."""
    s = _check_s(s)
    if law.variant == NEWTONIAN:
        out = s.astype(float)
    else:
        e1 = law.exponent + 1.0  # = q/2 > 0 for every admissible law
        a = law.shift
        pw = ((a + s) ** e1 - a**e1) / e1
        out = pw if law.variant == POWER_LAW_A else law.m0 * s + pw
    return out if out.ndim else float(out)


def coercivity_defect(law: ViscosityLaw, pair: StressPair) -> float:
    """G[|A|^2]|B|^2 + 2 G'[|A|^2](A:B)^2 - m0 |B|^2; nonnegative for admissible laws."""
    a2 = frobenius_sq(pair.d, pair.A)
    b2 = frobenius_sq(pair.d, pair.B)
    ab = tensor_dot(pair.d, pair.A, pair.B)
    return float(eval_G(law, a2) * b2 + 2.0 * eval_G_deriv(law, a2, 1) * ab**2 - law.m0 * b2)


def monotonicity_defect(law: ViscosityLaw, d: int, Dv: np.ndarray, Dw: np.ndarray) -> float:
    """(S(Dv) - S(Dw)) : (Dv - Dw) - m0 |Dv - Dw|^2, pointwise."""
    diff = Dv - Dw
    sdiff = eval_stress(law, d, Dv) - eval_stress(law, d, Dw)
    return float(tensor_dot(d, sdiff, diff) - law.m0 * frobenius_sq(d, diff))


@dataclass
class StructureReport:
    """Outcome of sampling the structure conditions of a law."""

    passed: bool
    floor_min: float          # min of G[s] - m0 over the samples
    coercive_min: float       # min of G[s] + 2 G'[s] s - m0
    witnessed_C: dict = field(default_factory=dict)  # (k, alpha) -> smallest admissible C_k
    violations: list = field(default_factory=list)   # offending s values


def check_structure_conditions(law: ViscosityLaw, s_samples, tol: float = 1e-12) -> StructureReport:
    """Sample the floor, coercivity and derivative-growth conditions.

    The growth constants are existential, so the report returns the smallest
    constant witnessed over the sample set for each (k, alpha) in
    {1,2} x {0,1} rather than asserting fixed values.
    """
    s = _check_s(np.asarray(s_samples, dtype=float))
    g = np.asarray(eval_G(law, s))
    g1 = np.asarray(eval_G_deriv(law, s, 1))
    g2 = np.asarray(eval_G_deriv(law, s, 2))

    floor = g - law.m0
    coercive = g + 2.0 * g1 * s - law.m0
    violations = [float(v) for v in s[(floor < -tol) | (coercive < -tol)]]

    witnessed = {}
    for k, (num, den) in ((1, (g1, g)), (2, (g2, g1))):
        for alpha in (0, 1):
            lhs = np.abs(num) * s**alpha
            rhs = np.abs(den)
            ratio = np.where(rhs > tol, lhs / np.maximum(rhs, tol), np.where(lhs <= tol, 0.0, np.inf))
            witnessed[(k, alpha)] = float(np.max(ratio)) if ratio.size else 0.0

    passed = not violations and all(np.isfinite(c) for c in witnessed.values())
    return StructureReport(
        passed=passed,
        floor_min=float(np.min(floor)) if s.size else 0.0,
        coercive_min=float(np.min(coercive)) if s.size else 0.0,
        witnessed_C=witnessed,
        violations=violations,
    )


def random_symmetric_packed(rng: np.random.Generator, d: int, n: int = 1, scale: float = 2.0) -> np.ndarray:
    """Uniform random packed symmetric tensors with entries in [-scale, scale]."""
    m = len(PACK_PAIRS[d])
    out = rng.uniform(-scale, scale, size=(n, m))
    return out if n > 1 else out[0]
