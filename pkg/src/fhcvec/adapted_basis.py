"""Basis (u_k) with u_0 = e_0 and P(B_w) u_k = u_{k-1}.

Writing u_k = sum_t beta_{t,k} e_t and b_{t,k} = beta_{t,k} W_t, the matching
conditions become

    sum_i lambda_i b_{t+i,k} = b_{t,k-1},      b_{0,k} = 0 (k >= 1),

which does not involve the weights at all.  Read from the top row down, each
column is the output of the IIR filter with denominator (lambda_1, ..., lambda_d)
driven by the previous column, so a whole column costs one ``lfilter`` call.
The weights only enter through the row scale 1/W_t, kept in log form, which is
why huge partial products never overflow the table.

|b_{t,k}| <= rho^k with rho = 1/(|lambda_1| - sum_{i>=2} |lambda_i|).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular
from scipy.signal import lfilter

from .core import LogMagnitude, SpaceConfig, SparseVec, combine, log_lp_norm
from .shift_ops import PolynomialSpec, ShiftOperator, admissibility, apply_polynomial
from .weights import WeightFamily, fhc_constant


def _columns(coeffs: np.ndarray, prev: np.ndarray, k0: int, K: int, out: np.ndarray):
    """Fill columns k0..K of the scaled table ``out`` (column k0-1 must be set)."""
    for k in range(k0, K + 1):
        drive = out[k - 1::-1, k - 1]  # rows k-1 down to 0
        y = lfilter([1.0], coeffs, drive)
        out[k:0:-1, k] = y  # rows k down to 1
        out[0, k] = 0.0


@dataclass
class AdaptedBasis:
    poly: PolynomialSpec
    family: WeightFamily
    space: SpaceConfig
    K: int
    b: np.ndarray  # scaled table, b[t, k] = beta_{t,k} * W_t
    rho: float
    cw: float
    log_w: np.ndarray = field(repr=False, default=None)
    phase_w: np.ndarray = field(repr=False, default=None)

    # table access ---------------------------------------------------------

    def beta(self, t: int, k: int) -> LogMagnitude:
        if not (0 <= t <= self.K and 0 <= k <= self.K):
            raise IndexError("index outside the built table")
        z = self.b[t, k]
        if z == 0:
            return LogMagnitude.zero()
        return LogMagnitude(math.log(abs(z)) - self.log_w[t],
                            math.remainder(math.atan2(z.imag, z.real) - self.phase_w[t], 2 * math.pi))

    def beta_value(self, t: int, k: int) -> complex:
        return self.beta(t, k).to_complex()

    def vector(self, k: int) -> SparseVec:
        if k > self.K:
            raise IndexError(f"basis built up to K={self.K}, asked for u_{k}")
        col = self.b[: k + 1, k]
        idx = np.nonzero(col)[0]
        v = SparseVec(idx, col[idx])
        ph = -self.phase_w[idx] if self.family.has_phase else None
        return v.scale_log(-self.log_w[idx], ph)

    def log_norm(self, k: int) -> float:
        return log_lp_norm(self.vector(k), self.space)

    def extend(self, K_new: int) -> "AdaptedBasis":
        """Append columns up to K_new; existing entries are left untouched."""
        if K_new <= self.K:
            return self
        b = np.zeros((K_new + 1, K_new + 1), np.complex128)
        b[: self.K + 1, : self.K + 1] = self.b
        _columns(np.array(self.poly.coeffs), None, self.K + 1, K_new, b)
        n = np.arange(K_new + 1)
        return AdaptedBasis(self.poly, self.family, self.space, K_new, b, self.rho, self.cw,
                            self.family.log_abs_W(n), self.family.phase_W(n))

    def rows(self):
        """(k, l, log|beta_{l,k}|, arg beta_{l,k}) over the triangle l <= k."""
        for k in range(self.K + 1):
            for l in range(k + 1):
                z = self.b[l, k]
                if z == 0:
                    yield k, l, -math.inf, 0.0
                else:
                    m = self.beta(l, k)
                    yield k, l, m.log_abs, m.phase


def build_adapted_basis(P: PolynomialSpec, family: WeightFamily, K: int, space: SpaceConfig,
                        cw: float | None = None) -> AdaptedBasis:
    margin, ok = admissibility(P)
    if not ok:
        raise ValueError(f"polynomial is not admissible (margin {margin:.6g} <= 0)")
    if K < 0:
        raise ValueError("K must be nonnegative")
    if cw is None:
        verdict = fhc_constant(family, space)
        if not verdict.converges:
            raise ValueError(f"weights are not frequently hypercyclic on l_p ({verdict.status}); pass cw to override")
        cw = verdict.value
    n = np.arange(K + 1)
    log_w = family.log_abs_W(n)
    if family.kind == "explicit" or family.kind == "custom":
        lw = family.log_abs_w(np.arange(1, K + 1)) if K else np.array([])
        if np.any(~np.isfinite(lw)):
            raise ValueError("zero weight encountered")
    b = np.zeros((K + 1, K + 1), np.complex128)
    b[0, 0] = 1.0
    _columns(np.array(P.coeffs), None, 1, K, b)
    return AdaptedBasis(P, family, space, K, b, 1.0 / margin, float(cw), log_w, family.phase_W(n))


@dataclass
class BasisCheck:
    k: int
    residual: float
    relative_residual: float
    beta_ratio: float  # max_l |beta_{l,k}| |W_l| / rho^k
    norm_ratio: float  # ||u_k|| / (C_w rho^k)
    passed: bool


@dataclass
class VerificationReport:
    tol: float
    rows: list
    passed: bool
    worst_residual: float
    worst_relative_residual: float
    worst_beta_ratio: float
    worst_norm_ratio: float

    def to_json(self) -> dict:
        return {
            "tol": self.tol, "passed": self.passed,
            "worst_residual": self.worst_residual,
            "worst_relative_residual": self.worst_relative_residual,
            "worst_beta_ratio": self.worst_beta_ratio,
            "worst_norm_ratio": self.worst_norm_ratio,
            "rows": [r.__dict__ for r in self.rows],
        }


def verify_basis(basis: AdaptedBasis, tol: float = 1e-9, space: SpaceConfig | None = None,
                 rho: float | None = None) -> VerificationReport:
    """Residual of the defining relation plus the two decay bounds, per k.

    The residual is recomputed through ``apply_polynomial`` in e-coordinates,
    independently of the scaled recursion used to build the table.  ``rho``
    overrides the basis' own rate in bound checks (b) and (c).
    """
    space = space or basis.space
    rho = basis.rho if rho is None else rho
    op = ShiftOperator(basis.family)
    rows = []
    prev = basis.vector(0)
    for k in range(basis.K + 1):
        u = basis.vector(k)
        if k == 0:
            res = rel = 0.0 if (len(u) == 1 and u.idx[0] == 0 and u.get(0) == 1) else math.inf
            ln_prev = 0.0
        else:
            r = apply_polynomial(basis.poly, op, u) - prev
            ln_r = log_lp_norm(r, space)
            ln_prev = log_lp_norm(prev, space)
            res = math.exp(ln_r) if ln_r > -math.inf else 0.0
            rel = math.exp(ln_r - ln_prev) if ln_r > -math.inf else 0.0
        col = np.abs(basis.b[1: k + 1, k]) if k else np.array([0.0])
        beta_ratio = float(col.max()) / rho**k if k else 0.0
        ln_u = log_lp_norm(u, space)
        norm_ratio = math.exp(ln_u - math.log(basis.cw) - k * math.log(rho)) if k else 0.0
        ok_a = res <= tol * max(1.0, math.exp(ln_prev)) if k else res == 0.0
        ok = ok_a and beta_ratio <= 1 + tol and norm_ratio <= 1 + tol
        if k and basis.b[k, k] == 0:
            ok = False
        rows.append(BasisCheck(k, res, rel, beta_ratio, norm_ratio, bool(ok)))
        prev = u
    return VerificationReport(
        tol, rows, all(r.passed for r in rows),
        max(r.residual for r in rows), max(r.relative_residual for r in rows),
        max(r.beta_ratio for r in rows), max(r.norm_ratio for r in rows))


def expand_in_basis(h: SparseVec, basis: AdaptedBasis) -> np.ndarray:
    """Coefficients c_0..c_deg with sum_k c_k u_k = h."""
    d = h.degree
    if d < 0:
        return np.zeros(0, np.complex128)
    if d > basis.K:
        raise IndexError(f"target degree {d} exceeds basis size K={basis.K}")
    g = np.zeros(d + 1, np.complex128)
    lw = basis.log_w[h.idx] + h.log_abs()
    if lw.max() > 700:
        raise OverflowError("target too large in scaled coordinates")
    ph = h.phase() + (basis.phase_w[h.idx] if basis.family.has_phase else 0.0)
    g[h.idx] = np.exp(lw + 1j * ph)
    c = solve_triangular(basis.b[: d + 1, : d + 1], g, lower=False)
    if not np.all(np.isfinite(c)):
        raise OverflowError("expansion coefficients exceed double range")
    return c


def recombine(coeffs, basis) -> SparseVec:
    return combine((c, basis.vector(k)) for k, c in enumerate(coeffs))
