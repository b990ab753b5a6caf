"""Finite-support vectors on l_p, norms, and log-domain magnitudes.

A ``SparseVec`` stores each coefficient as ``mant * 2**exp2`` with a complex
mantissa and an integer binary exponent.  Coefficients such as
``X_j / W_j`` with ``|W_j| = 2**200000`` are therefore representable without
underflow, and every arithmetic step that rescales a coefficient is exact up
to the rounding of the mantissa product.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

LN2 = math.log(2.0)


@dataclass(frozen=True)
class SpaceConfig:
    p: float = 2.0

    def __post_init__(self):
        if not (math.isfinite(self.p) and self.p >= 1.0):
            raise ValueError(f"p must satisfy 1 <= p < inf, got {self.p!r}")


@dataclass(frozen=True)
class LogMagnitude:
    """Complex number stored as (log|z|, arg z).  ``log_abs = -inf`` is zero."""

    log_abs: float
    phase: float = 0.0

    @property
    def is_zero(self) -> bool:
        return self.log_abs == -math.inf

    @classmethod
    def zero(cls) -> "LogMagnitude":
        return cls(-math.inf, 0.0)

    @classmethod
    def from_complex(cls, z: complex) -> "LogMagnitude":
        z = complex(z)
        if z == 0:
            return cls.zero()
        return cls(math.log(abs(z)), math.atan2(z.imag, z.real))

    def to_complex(self) -> complex:
        if self.is_zero:
            return 0j
        r = math.exp(self.log_abs)
        return complex(r * math.cos(self.phase), r * math.sin(self.phase))

    def __mul__(self, other: "LogMagnitude") -> "LogMagnitude":
        if self.is_zero or other.is_zero:
            return LogMagnitude.zero()
        return LogMagnitude(self.log_abs + other.log_abs, _wrap(self.phase + other.phase))

    def __truediv__(self, other: "LogMagnitude") -> "LogMagnitude":
        if other.is_zero:
            raise ZeroDivisionError("division by a zero LogMagnitude")
        if self.is_zero:
            return LogMagnitude.zero()
        return LogMagnitude(self.log_abs - other.log_abs, _wrap(self.phase - other.phase))


def _wrap(phi: float) -> float:
    return math.remainder(phi, 2.0 * math.pi)


def _normalize(mant: np.ndarray, exp2: np.ndarray):
    """Rescale so the larger of |re|, |im| lies in [0.5, 1).  Exact for normal floats."""
    re, im = mant.real, mant.imag
    big = np.maximum(np.abs(re), np.abs(im))
    _, e = np.frexp(big)
    e = e.astype(np.int64)
    re = np.ldexp(re, -e)
    im = np.ldexp(im, -e)
    return re + 1j * im, exp2 + e


class SparseVec:
    """Element of c_00: strictly increasing indices, nonzero coefficients."""

    __slots__ = ("idx", "mant", "exp2")

    def __init__(self, idx=(), mant=(), exp2=None, *, _trusted=False):
        idx = np.asarray(idx, dtype=np.int64).reshape(-1)
        mant = np.asarray(mant, dtype=np.complex128).reshape(-1)
        exp2 = np.zeros(idx.shape, np.int64) if exp2 is None else np.asarray(exp2, np.int64).reshape(-1)
        if not (idx.shape == mant.shape == exp2.shape):
            raise ValueError("idx, mant and exp2 must have equal length")
        if not _trusted:
            if idx.size and idx.min() < 0:
                raise ValueError("indices must be nonnegative")
            if not np.all(np.isfinite(mant)):
                raise ValueError("coefficients must be finite")
            order = np.argsort(idx, kind="stable")
            idx, mant, exp2 = idx[order], mant[order], exp2[order]
            if idx.size > 1 and np.any(np.diff(idx) == 0):
                raise ValueError("duplicate indices")
            keep = mant != 0
            idx, mant, exp2 = idx[keep], mant[keep], exp2[keep]
            mant, exp2 = _normalize(mant, exp2)
        for a in (idx, mant, exp2):
            a.setflags(write=False)
        self.idx, self.mant, self.exp2 = idx, mant, exp2

    # construction ---------------------------------------------------------

    @classmethod
    def from_dict(cls, d: Mapping[int, complex]) -> "SparseVec":
        if not d:
            return cls()
        keys = sorted(int(k) for k in d)
        return cls(keys, [complex(d[k]) for k in keys])

    @classmethod
    def from_dense(cls, values, offset: int = 0) -> "SparseVec":
        values = np.asarray(values, dtype=np.complex128)
        return cls(np.arange(offset, offset + values.size), values)

    @classmethod
    def from_log(cls, idx, log_abs, phase=None) -> "SparseVec":
        """Entries exp(log_abs + i*phase); -inf log_abs means zero."""
        idx = np.asarray(idx, np.int64)
        log_abs = np.asarray(log_abs, np.float64)
        keep = np.isfinite(log_abs)
        if np.any(np.isnan(log_abs)) or np.any(log_abs == np.inf):
            raise ValueError("log magnitudes must be finite or -inf")
        idx, log_abs = idx[keep], log_abs[keep]
        ph = np.zeros_like(log_abs) if phase is None else np.asarray(phase, np.float64)[keep]
        t = log_abs / LN2
        k = np.floor(t)
        mant = np.exp2(t - k) * np.exp(1j * ph)
        return cls(idx, mant, k.astype(np.int64))

    # access ---------------------------------------------------------------

    def __len__(self) -> int:
        return int(self.idx.size)

    def __repr__(self) -> str:
        if len(self) > 6:
            return f"SparseVec(nnz={len(self)}, support=[{self.idx[0]}..{self.idx[-1]}])"
        return f"SparseVec({self.to_dict()!r})"

    @property
    def degree(self) -> int:
        """Largest index in the support, -1 for the zero vector."""
        return int(self.idx[-1]) if len(self) else -1

    def log_abs(self) -> np.ndarray:
        return np.log(np.abs(self.mant)) + self.exp2 * LN2

    def phase(self) -> np.ndarray:
        return np.angle(self.mant)

    def values(self) -> np.ndarray:
        """Plain complex values; coefficients outside double range flush to 0 or raise."""
        with np.errstate(over="ignore"):
            out = np.ldexp(self.mant.real, self.exp2) + 1j * np.ldexp(self.mant.imag, self.exp2)
        if not np.all(np.isfinite(out)):
            raise OverflowError("coefficient exceeds double range; use log_abs()")
        return out

    def get(self, i: int) -> complex:
        pos = np.searchsorted(self.idx, i)
        if pos < len(self) and self.idx[pos] == i:
            m, e = self.mant[pos], int(self.exp2[pos])
            return complex(math.ldexp(m.real, e), math.ldexp(m.imag, e))
        return 0j

    def to_dict(self) -> dict[int, complex]:
        return {int(i): complex(v) for i, v in zip(self.idx, self.values())}

    def dense(self, n: int | None = None) -> np.ndarray:
        n = self.degree + 1 if n is None else n
        out = np.zeros(n, np.complex128)
        sel = self.idx < n
        out[self.idx[sel]] = self.values()[sel]
        return out

    def restrict(self, lo: int = 0, hi: int | None = None) -> "SparseVec":
        sel = self.idx >= lo
        if hi is not None:
            sel &= self.idx <= hi
        return SparseVec(self.idx[sel], self.mant[sel], self.exp2[sel], _trusted=True)

    def scale(self, a: complex) -> "SparseVec":
        a = complex(a)
        if a == 0:
            return SparseVec()
        return SparseVec(self.idx, self.mant * a, self.exp2)

    def scale_log(self, log_factor, phase=None) -> "SparseVec":
        """Multiply entry-wise by exp(log_factor + i*phase) (arrays aligned with idx)."""
        log_factor = np.broadcast_to(np.asarray(log_factor, np.float64), self.idx.shape)
        t = log_factor / LN2
        k = np.floor(t)
        f = np.exp2(t - k)
        if phase is not None:
            f = f * np.exp(1j * np.broadcast_to(np.asarray(phase, np.float64), self.idx.shape))
        return SparseVec(self.idx, self.mant * f, self.exp2 + k.astype(np.int64))

    def equals(self, other: "SparseVec") -> bool:
        return (
            np.array_equal(self.idx, other.idx)
            and np.array_equal(self.mant, other.mant)
            and np.array_equal(self.exp2, other.exp2)
        )

    def __add__(self, other: "SparseVec") -> "SparseVec":
        return combine([(1.0, self), (1.0, other)])

    def __sub__(self, other: "SparseVec") -> "SparseVec":
        return combine([(1.0, self), (-1.0, other)])

    def __neg__(self) -> "SparseVec":
        return self.scale(-1.0)

    # text form ------------------------------------------------------------

    def dumps(self) -> str:
        lines = []
        for i, m, e in zip(self.idx, self.mant, self.exp2):
            lines.append(f"{int(i)} {_fmt(m.real, int(e))} {_fmt(m.imag, int(e))}")
        return "\n".join(lines) + ("\n" if lines else "")

    @classmethod
    def loads(cls, text: str) -> "SparseVec":
        idx, mant, exp2 = [], [], []
        for raw in text.splitlines():
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 3:
                raise ValueError(f"expected 'index re im', got {raw!r}")
            (mr, er), (mi, ei) = _parse(parts[1]), _parse(parts[2])
            if mr == 0:
                er = ei
            if mi == 0:
                ei = er
            e = max(er, ei)
            idx.append(int(parts[0]))
            mant.append(complex(math.ldexp(mr, er - e), math.ldexp(mi, ei - e)))
            exp2.append(e)
        return cls(idx, mant, exp2)


def _fmt(x: float, e: int) -> str:
    """Exact text for x * 2**e: decimal repr in double range, hex float beyond."""
    if x == 0:
        return "0.0"
    if -900 < e < 900:
        return repr(math.ldexp(x, e))
    h = float.hex(x)
    head, _, tail = h.partition("p")
    return f"{head}p{int(tail) + e:+d}"


def _parse(s: str) -> tuple[float, int]:
    """Return (mantissa in [0.5,1) or 0, binary exponent)."""
    if "x" in s.lower():
        head, _, tail = s.partition("p")
        m = float.fromhex(head + "p0")
        fm, fe = math.frexp(m)
        return fm, fe + int(tail or 0)
    v = float(s)
    if not math.isfinite(v):
        raise ValueError(f"non-finite coefficient {s!r}")
    return math.frexp(v)


def combine(terms: Iterable[tuple[complex, SparseVec]]) -> SparseVec:
    """Linear combination sum(a_i * x_i), exact-zero pruning only."""
    parts = [(complex(a), x) for a, x in terms if complex(a) != 0 and len(x)]
    if not parts:
        return SparseVec()
    if len(parts) == 1:
        a, x = parts[0]
        return x.scale(a)
    idx = np.concatenate([x.idx for _, x in parts])
    mant = np.concatenate([x.mant * a for a, x in parts])
    exp2 = np.concatenate([x.exp2 for _, x in parts])
    mant, exp2 = _normalize(mant, exp2)
    uniq, inv = np.unique(idx, return_inverse=True)
    emax = np.full(uniq.size, np.iinfo(np.int64).min, np.int64)
    np.maximum.at(emax, inv, exp2)
    shift = exp2 - emax[inv]
    scaled = np.ldexp(mant.real, shift) + 1j * np.ldexp(mant.imag, shift)
    acc = np.zeros(uniq.size, np.complex128)
    np.add.at(acc, inv, scaled)
    return SparseVec(uniq, acc, emax)


def vec_axpy(a: complex, x: SparseVec, y: SparseVec) -> SparseVec:
    return combine([(a, x), (1.0, y)])


def log_lp_norm(v: SparseVec, space: SpaceConfig) -> float:
    """log ||v||_p, -inf for the zero vector."""
    if not len(v):
        return -math.inf
    p = space.p
    la = v.log_abs() * p
    top = float(la.max())
    terms = np.sort(np.exp(la - top))[::-1]
    return (top + math.log(math.fsum(terms))) / p


def lp_norm(v: SparseVec, space: SpaceConfig) -> float:
    ln = log_lp_norm(v, space)
    if ln == -math.inf:
        return 0.0
    if ln > 709.0:
        raise OverflowError("norm exceeds double range; use log_lp_norm")
    return math.exp(ln)


def lp_dist(x: SparseVec, y: SparseVec, space: SpaceConfig) -> float:
    return lp_norm(x - y, space)


def dense_lp_norm(values: np.ndarray, p: float, axis=-1) -> np.ndarray:
    """Row-wise l_p norm of dense complex arrays, scaled to avoid overflow."""
    a = np.abs(values)
    top = a.max(axis=axis, keepdims=True)
    safe = np.where(top > 0, top, 1.0)
    s = np.sum((a / safe) ** p, axis=axis, keepdims=True) ** (1.0 / p)
    return np.squeeze(s * top, axis=axis)
