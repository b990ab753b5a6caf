"""2-adic block bookkeeping, window unions and natural-density estimates."""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np


def v2(n):
    """2-adic valuation (scalar or int array, n >= 1)."""
    if np.ndim(n) == 0:
        n = int(n)
        if n < 1:
            raise ValueError("v2 is defined for n >= 1")
        return (n & -n).bit_length() - 1
    n = np.asarray(n, dtype=np.int64)
    if np.any(n < 1):
        raise ValueError("v2 is defined for n >= 1")
    low = n & -n
    return np.log2(low.astype(np.float64)).astype(np.int64)  # exact: low is a power of two


def psi(n):
    return v2(n) + 1


def family_of_block(n, n_families: Optional[int] = None):
    """Family index owning block n; finite lists wrap around as ((k-1) mod F) + 1."""
    k = psi(n)
    if n_families is None:
        return k
    return (k - 1) % n_families + 1


def _powers(m: int, upto: int) -> list[int]:
    out = [1]
    while out[-1] <= upto:
        out.append(out[-1] * m)
    return out


def block_index(j: int, m: int) -> tuple[int, int]:
    """(n, psi(n)) with m^n <= j < m^(n+1), by integer comparison."""
    if m < 2:
        raise ValueError("m must be >= 2")
    if j < m:
        raise ValueError(f"j={j} is below m={m}")
    n = bisect_right(_powers(m, j), j) - 1
    return n, psi(n)


def block_indices(j: np.ndarray, m: int) -> np.ndarray:
    """Vectorised n = floor(log_m j) for j >= 1."""
    j = np.asarray(j, dtype=np.int64)
    if j.size == 0:
        return j.copy()
    if j.min() < 1:
        raise ValueError("indices must be >= 1")
    pw = np.array(_powers(m, int(j.max())), dtype=object)
    pw = np.array([int(x) for x in pw if x < 2**62], dtype=np.int64)
    return np.searchsorted(pw, j, side="right") - 1


def window(m: int, gamma: float, n: int) -> tuple[int, int]:
    return m**n, int(math.floor(gamma * m**n))


def r_k_windows(k: int, m: int, gamma: float, N: int) -> list[tuple[int, int]]:
    """Windows [m^n, gamma m^n] with psi(n) = k, clipped to [1, N]."""
    if not (2 <= gamma < m):
        raise ValueError("need 2 <= gamma < m")
    out = []
    n = 2 ** (k - 1)
    while m**n <= N:
        a, b = window(m, gamma, n)
        out.append((a, min(b, N)))
        n += 2**k
    return out


def r_k_window_union(k: int, m: int, gamma: float, N: int) -> np.ndarray:
    ws = r_k_windows(k, m, gamma, N)
    if not ws:
        return np.zeros(0, np.int64)
    return np.concatenate([np.arange(a, b + 1, dtype=np.int64) for a, b in ws])


@dataclass
class DensityEstimate:
    horizon: int
    burn_in: int
    running_min_ratio: float
    final_ratio: float
    trace: Optional[np.ndarray] = field(default=None, repr=False)  # rows (n, count, ratio)

    def to_json(self) -> dict:
        return {"horizon": self.horizon, "burn_in": self.burn_in,
                "running_min_ratio": self.running_min_ratio, "final_ratio": self.final_ratio}


def default_burn_in(horizon: int) -> int:
    return max(100, horizon // 100)


def density_estimate(A, horizon: int, burn_in: Optional[int] = None, trace_points: int = 512) -> DensityEstimate:
    """Running ratio #(A n [1,n])/n; A is a sorted list/array or a predicate."""
    burn_in = default_burn_in(horizon) if burn_in is None else burn_in
    if not burn_in < horizon:
        raise ValueError("burn_in must be smaller than horizon")
    if callable(A):
        n = np.arange(1, horizon + 1)
        try:
            mask = np.asarray(A(n), dtype=bool)
            if mask.shape != n.shape:
                raise TypeError
        except (TypeError, ValueError):
            mask = np.fromiter((bool(A(int(i))) for i in n), bool, horizon)
    else:
        a = np.asarray(A, dtype=np.int64)
        a = a[(a >= 1) & (a <= horizon)]
        mask = np.zeros(horizon, bool)
        mask[a - 1] = True
    counts = np.cumsum(mask)
    n = np.arange(1, horizon + 1)
    ratio = counts / n
    lo = max(burn_in, 1)
    rmin = float(ratio[lo - 1:].min())
    pts = np.unique(np.geomspace(1, horizon, trace_points).astype(np.int64))
    tr = np.column_stack([pts, counts[pts - 1], ratio[pts - 1]])
    return DensityEstimate(horizon, burn_in, rmin, float(ratio[-1]), tr)


# ---------------------------------------------------------------------------
# alpha sequences

@dataclass(frozen=True)
class AlphaFamily:
    kind: str  # "log_power", "plain_log" or "custom"
    sigma: float = 1.0
    fn: Optional[Callable] = None

    def __call__(self, l):
        l = np.asarray(l, dtype=np.float64)
        if self.kind == "log_power":
            return np.log(l) ** self.sigma
        if self.kind == "plain_log":
            return np.log(l)
        if self.fn is None:
            raise ValueError("custom alpha needs fn")
        return np.asarray(self.fn(l), dtype=np.float64)

    def describe(self) -> dict:
        return {"kind": self.kind, "sigma": self.sigma} if self.kind == "log_power" else {"kind": self.kind}


@dataclass
class AlphaVerdict:
    passed: bool
    method: str
    ratios: list
    consequence: float  # (log n) alpha_n / n at the horizon
    reason: str = ""

    def to_json(self) -> dict:
        return dict(self.__dict__)


def alpha_condition_check(alpha: AlphaFamily, eps_t: float, horizon: int = 10**6) -> AlphaVerdict:
    """Growth condition sum_{l<=k} alpha_l = O(k^2 / (log k)^(1+eps_t)).

    The sequence is read from l = 2 on (log-type sequences vanish at l = 1).
    """
    if horizon < 100:
        raise ValueError("horizon must be >= 100")
    l = np.arange(2, horizon + 1, dtype=np.float64)
    a = alpha(l)
    if np.any(np.diff(a) <= 0) or a[0] <= 0:
        raise ValueError("alpha must be positive and strictly increasing")
    cs = np.cumsum(a)
    ks = [2**e for e in range(4, int(math.log2(horizon)) + 1)]
    ratios = [float(cs[k - 2] * math.log(k) ** (1 + eps_t) / k**2) for k in ks]
    consequence = float(math.log(horizon) * a[-1] / horizon)
    if alpha.kind in ("log_power", "plain_log") and (alpha.kind == "plain_log" or alpha.sigma > 0):
        return AlphaVerdict(True, "analytic", ratios, consequence)
    tail = ratios[len(ratios) // 2:]
    ok = all(b <= a_ * (1 + 1e-12) for a_, b in zip(tail, tail[1:]))
    return AlphaVerdict(ok, "numeric", ratios, consequence,
                        "" if ok else "ratio still increasing over the last doublings")
