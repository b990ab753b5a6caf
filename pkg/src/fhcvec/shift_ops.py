"""Weighted backward shifts B_w e_n = w_n e_{n-1}, their powers and polynomials."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import SpaceConfig, SparseVec, combine
from .weights import WeightFamily, bounded_check

MAX_DEGREE = 32


@dataclass(frozen=True)
class PolynomialSpec:
    """P(z) = sum_{i=1}^d coeffs[i-1] z^i (no constant term)."""

    coeffs: tuple

    def __init__(self, coeffs: Sequence[complex]):
        c = tuple(complex(x) for x in coeffs)
        if not c:
            raise ValueError("polynomial needs degree >= 1")
        if len(c) > MAX_DEGREE:
            raise ValueError(f"degree {len(c)} exceeds the supported maximum {MAX_DEGREE}")
        if c[0] == 0:
            raise ValueError("lambda_1 must be nonzero")
        object.__setattr__(self, "coeffs", c)

    @property
    def degree(self) -> int:
        return len(self.coeffs)

    def __call__(self, z: complex) -> complex:
        return sum(c * z ** (i + 1) for i, c in enumerate(self.coeffs))

    def describe(self) -> list:
        return [[c.real, c.imag] for c in self.coeffs]


@dataclass(frozen=True)
class ShiftOperator:
    weights: WeightFamily

    def check_bounded(self, probe_horizon: int = 10_000):
        return bounded_check(self.weights, probe_horizon)


def admissibility(P: PolynomialSpec) -> tuple[float, bool]:
    """margin = |lambda_1| - sum_{i>=2} |lambda_i|; admissible iff margin > 0."""
    c = np.abs(np.array(P.coeffs))
    margin = float(c[0] - c[1:].sum())
    return margin, margin > 0


def apply_shift_power(op: ShiftOperator, n: int, v: SparseVec, space: SpaceConfig | None = None) -> SparseVec:
    """B_w^n v in one pass: coefficient j is v_{j+n} W_{j+n} / W_j."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    if n == 0 or not len(v):
        return v
    keep = v.idx >= n
    src = v.idx[keep]
    if not src.size:
        return SparseVec()
    dst = src - n
    fam = op.weights
    shifted = SparseVec(dst, v.mant[keep], v.exp2[keep], _trusted=True)
    lf = fam.log_abs_W(src) - fam.log_abs_W(dst)
    ph = fam.phase_W(src) - fam.phase_W(dst) if fam.has_phase else None
    return shifted.scale_log(lf, ph)


def apply_polynomial(P: PolynomialSpec, op: ShiftOperator, v: SparseVec, space: SpaceConfig | None = None) -> SparseVec:
    return combine((c, apply_shift_power(op, i + 1, v)) for i, c in enumerate(P.coeffs))


def truncated_apply(coeffs, n: int, basis) -> SparseVec:
    """sum_{k=0}^{n} X_{k+n} u_k for a basis exposing ``vector(k)``."""
    coeffs = list(coeffs)
    if len(coeffs) < 2 * n + 1:
        raise IndexError(f"need coefficients up to index {2 * n}, got {len(coeffs)}")
    return combine((coeffs[k + n], basis.vector(k)) for k in range(n + 1))


class WeightBasis:
    """u_k = e_k / W_k, the basis in which B_w acts as the unweighted shift."""

    def __init__(self, family: WeightFamily):
        self.family = family

    def vector(self, k: int) -> SparseVec:
        f = self.family
        ph = -f.phase_W(k) if f.has_phase else None
        return SparseVec([k], [1.0]).scale_log(-f.log_abs_W(k), ph)
