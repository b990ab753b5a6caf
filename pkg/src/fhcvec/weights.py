"""Weight sequences w = (w_n) and their partial products W_n = w_1 ... w_n.

Every family exposes ``log_abs_W(n)`` (vectorised, exact closed forms where one
exists) and ``weight(n)`` computed from the individual-weight formula, so the
two can be checked against each other.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate, special

from .core import LogMagnitude, SpaceConfig

KINDS = ("constant", "power", "ratio_power", "exp_log_power", "explicit", "custom")


@dataclass(frozen=True)
class WeightFamily:
    kind: str
    value: float = 0.0  # lambda, beta or epsilon depending on kind
    p: float = 1.0  # only used by ratio_power
    weights: tuple = ()  # explicit kind
    log_fn: Optional[Callable] = field(default=None, compare=False)  # custom kind: n -> log|W_n|
    phase_fn: Optional[Callable] = field(default=None, compare=False)
    name: str = ""

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown weight kind {self.kind!r}")
        if self.kind == "constant" and not self.value > 0:
            raise ValueError("constant weight must be positive")
        if self.kind == "explicit":
            if not self.weights:
                raise ValueError("explicit family needs at least one weight")
            if any(complex(w) == 0 for w in self.weights):
                raise ValueError("weights must be nonzero")
        if self.kind == "custom" and self.log_fn is None:
            raise ValueError("custom family needs log_fn")

    # constructors ---------------------------------------------------------

    @classmethod
    def constant(cls, lam: float) -> "WeightFamily":
        return cls("constant", float(lam))

    @classmethod
    def power(cls, beta: float) -> "WeightFamily":
        return cls("power", float(beta))

    @classmethod
    def ratio_power(cls, eps: float, p: float = 1.0) -> "WeightFamily":
        return cls("ratio_power", float(eps), p=float(p))

    @classmethod
    def exp_log_power(cls, eps: float) -> "WeightFamily":
        return cls("exp_log_power", float(eps))

    @classmethod
    def explicit(cls, weights: Sequence[complex]) -> "WeightFamily":
        return cls("explicit", weights=tuple(complex(w) for w in weights))

    @classmethod
    def custom(cls, log_fn, phase_fn=None, name="custom") -> "WeightFamily":
        return cls("custom", log_fn=log_fn, phase_fn=phase_fn, name=name)

    def describe(self) -> dict:
        d = {"kind": self.kind}
        if self.kind == "constant":
            d["lambda"] = self.value
        elif self.kind == "power":
            d["beta"] = self.value
        elif self.kind in ("ratio_power", "exp_log_power"):
            d["eps"] = self.value
            if self.kind == "ratio_power":
                d["p"] = self.p
        elif self.kind == "explicit":
            d["weights"] = [[w.real, w.imag] for w in self.weights]
        else:
            d["name"] = self.name
        return d

    @property
    def length(self) -> Optional[int]:
        return len(self.weights) if self.kind == "explicit" else None

    # partial products -----------------------------------------------------

    def log_abs_W(self, n):
        """log|W_n| for integer n >= 0 (scalar or array)."""
        scalar = np.ndim(n) == 0
        n = np.asarray(n, dtype=np.int64)
        if np.any(n < 0):
            raise ValueError("n must be nonnegative")
        nf = n.astype(np.float64)
        k = self.kind
        if k == "constant":
            out = nf * math.log(self.value)
        elif k == "power":
            out = self.value * np.log(np.maximum(nf, 1.0))
        elif k == "ratio_power":
            out = (1.0 + self.value) / self.p * np.log1p(nf)
            out = np.where(n == 0, 0.0, out)
        elif k == "exp_log_power":
            out = np.log(np.maximum(nf, 1.0)) ** (1.0 + self.value)
        elif k == "explicit":
            cum = self._explicit_tables()[0]
            if np.any(n > len(self.weights)):
                raise IndexError(f"explicit family defined for n <= {len(self.weights)}")
            out = cum[n]
        else:
            out = np.asarray(self.log_fn(n), dtype=np.float64)
            out = np.where(n == 0, 0.0, out)
        out = np.asarray(out, dtype=np.float64)
        if not np.all(np.isfinite(out)):
            raise ValueError("log|W_n| is not finite (zero weight?)")
        return float(out) if scalar else out

    def phase_W(self, n):
        """Accumulated argument of W_n (zero for the positive real kinds)."""
        scalar = np.ndim(n) == 0
        n = np.asarray(n, dtype=np.int64)
        if self.kind == "explicit":
            if np.any(n > len(self.weights)):
                raise IndexError(f"explicit family defined for n <= {len(self.weights)}")
            out = self._explicit_tables()[1][n]
        elif self.kind == "custom" and self.phase_fn is not None:
            out = np.where(n == 0, 0.0, np.asarray(self.phase_fn(n), np.float64))
        else:
            out = np.zeros(n.shape)
        return float(out) if scalar else out

    @property
    def has_phase(self) -> bool:
        if self.kind == "explicit":
            return any(complex(w).imag != 0 or complex(w).real < 0 for w in self.weights)
        return self.kind == "custom" and self.phase_fn is not None

    def _explicit_tables(self):
        cached = getattr(self, "_tables", None)
        if cached is None:
            w = np.array(self.weights, dtype=np.complex128)
            cum = np.concatenate([[0.0], np.cumsum(np.log(np.abs(w)))])
            ph = np.concatenate([[0.0], np.cumsum(np.angle(w))])
            cached = (cum, ph)
            object.__setattr__(self, "_tables", cached)
        return cached

    def weight(self, n: int) -> complex:
        """Individual weight w_n (n >= 1) from its own formula."""
        if n < 1:
            raise ValueError("weights are indexed from 1")
        k = self.kind
        if k == "constant":
            return complex(self.value)
        if k == "power":
            return 1.0 + 0j if n == 1 else complex((n / (n - 1)) ** self.value)
        if k == "ratio_power":
            return complex(((n + 1) / n) ** ((1.0 + self.value) / self.p))
        if k == "exp_log_power":
            if n == 1:
                return 1.0 + 0j
            e = 1.0 + self.value
            return complex(math.exp(math.log(n) ** e - math.log(n - 1) ** e))
        if k == "explicit":
            if n > len(self.weights):
                raise IndexError(f"explicit family defined for n <= {len(self.weights)}")
            return self.weights[n - 1]
        lw = self.log_abs_W(n) - self.log_abs_W(n - 1)
        ph = self.phase_W(n) - self.phase_W(n - 1)
        return complex(math.exp(lw) * math.cos(ph), math.exp(lw) * math.sin(ph))

    def log_abs_w(self, n):
        """log|w_n| for n >= 1 as differences of partial products (vectorised)."""
        n = np.asarray(n, dtype=np.int64)
        return self.log_abs_W(n) - self.log_abs_W(n - 1)

    # tails ----------------------------------------------------------------

    def log_tail_sum(self, J: int, p: float) -> float:
        """log of sum_{j > J} |W_j|^{-p}; +inf when the series diverges."""
        k = self.kind
        if k == "constant":
            lam = self.value
            if lam <= 1.0:
                return math.inf
            return -p * (J + 1) * math.log(lam) - math.log1p(-(lam ** -p))
        if k == "power":
            s = self.value * p
            if s <= 1.0:
                return math.inf
            return math.log(special.zeta(s, max(J, 0) + 1))
        if k == "ratio_power":
            s = (1.0 + self.value) * p / self.p
            if s <= 1.0:
                return math.inf
            return math.log(special.zeta(s, J + 2))
        if k == "exp_log_power":
            return _exp_log_tail(self.value, p, J)
        if k == "explicit":
            raise ValueError("an explicit family has no infinite tail")
        return _numeric_log_tail(lambda j: -p * self.log_abs_W(j), J)


def _exp_log_tail(eps: float, p: float, J: int) -> float:
    e = 1.0 + eps
    if eps < 0 or (eps == 0 and p <= 1):
        return math.inf
    if eps == 0:
        return math.log(special.zeta(p, J + 1))
    # exact partial sum over a stretch, integral bound for the rest
    L = 4096
    j = np.arange(J + 1, J + 1 + L, dtype=np.float64)
    lt = -p * np.log(np.maximum(j, 1.0)) ** e
    top = lt.max()
    part = math.fsum(np.exp(lt - top))
    u0 = math.log(J + L)
    f = lambda u: math.exp(u - p * u**e - top)
    rest, _ = integrate.quad(f, u0, np.inf, limit=200)
    return top + math.log(part + rest)


def _numeric_log_tail(log_term, J: int, chunk=1 << 16, max_terms=1 << 24) -> float:
    acc = -math.inf
    start = J + 1
    prev = None
    while start - J - 1 < max_terms:
        j = np.arange(start, start + chunk)
        lt = np.asarray(log_term(j), np.float64)
        top = lt.max()
        s = top + math.log(math.fsum(np.exp(lt - top)))
        acc = np.logaddexp(acc, s)
        if prev is not None and s - acc < math.log(1e-13):
            return float(acc)
        prev = s
        start += chunk
    return math.inf


def logW(family: WeightFamily, n: int) -> LogMagnitude:
    return LogMagnitude(family.log_abs_W(int(n)), family.phase_W(int(n)))


def log_product_range(family: WeightFamily, start: int, length: int) -> float:
    """log|w_start ... w_{start+length-1}| (start >= 1)."""
    if start < 1 or length < 0:
        raise ValueError("products start at index 1 and have nonnegative length")
    return family.log_abs_W(start + length - 1) - family.log_abs_W(start - 1)


# ---------------------------------------------------------------------------
# series verdicts

STATUSES = ("converges_analytic", "converges_numeric", "diverges_witness", "inconclusive")


@dataclass
class SeriesVerdict:
    status: str
    value: Optional[float] = None
    witness: Optional[dict] = None
    evidence: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.status not in STATUSES:
            raise ValueError(self.status)
        if self.converges != (self.value is not None):
            raise ValueError("value present iff the verdict is a convergence")
        if (self.status == "diverges_witness") != (self.witness is not None):
            raise ValueError("witness present iff diverges_witness")

    @property
    def converges(self) -> bool:
        return self.status.startswith("converges")

    def to_json(self) -> dict:
        return {"status": self.status, "value": self.value, "witness": self.witness, "evidence": self.evidence}


def numeric_series(log_term: Callable, n0: int = 1, N0: int = 1024, N_max: int = 1 << 22,
                   rel_tol: float = 1e-10) -> SeriesVerdict:
    """Doubling rule on sum_{j>=n0} exp(log_term(j)).

    Converges when two consecutive doublings change the partial sum by at most
    ``rel_tol`` relative.  A divergence witness is reported when the dyadic block
    sums stop decreasing over the last three doublings (each block is bounded
    below by the reported constant).
    """
    log_S = -math.inf
    N = n0 - 1
    blocks = []  # (lo, hi, log block sum)
    trace = []
    small = 0
    target = n0 - 1 + N0
    while True:
        j = np.arange(N + 1, target + 1)
        lt = np.asarray(log_term(j), np.float64)
        if np.any(np.isnan(lt)) or np.any(lt == np.inf):
            return SeriesVerdict("inconclusive", evidence={"reason": "non-finite term", "at": int(N + 1)})
        top = lt.max()
        lb = -math.inf if top == -math.inf else top + math.log(math.fsum(np.exp(lt - top)))
        new_S = float(np.logaddexp(log_S, lb))
        blocks.append((int(N + 1), int(target), lb))
        trace.append({"N": int(target), "log_S": new_S})
        rel = math.exp(lb - new_S) if lb > -math.inf else 0.0
        small = small + 1 if (rel <= rel_tol and len(blocks) > 1) else 0
        log_S = new_S
        N = target
        if small >= 2:
            if log_S > 709:
                return SeriesVerdict("inconclusive", evidence={"reason": "sum overflows", "log_S": log_S})
            return SeriesVerdict("converges_numeric", value=math.exp(log_S),
                                 evidence={"rule": "doubling", "rel_tol": rel_tol, "trace": trace[-4:]})
        if target >= N_max:
            break
        target = n0 - 1 + 2 * (target - n0 + 1)
    last = blocks[-3:]
    if len(last) == 3 and last[0][2] > -math.inf and all(b[2] >= a[2] for a, b in zip(last, last[1:])):
        lo = min(b[2] for b in last)
        return SeriesVerdict("diverges_witness", witness={
            "kind": "dyadic_blocks", "windows": [[a, b] for a, b, _ in last],
            "log_lower_bound": lo, "lower_bound": math.exp(min(lo, 700.0))})
    return SeriesVerdict("inconclusive", evidence={"trace": trace[-4:], "last_rel_increment": rel})


def fhc_constant(family: WeightFamily, space: SpaceConfig) -> SeriesVerdict:
    """Verdict on sum_{j>=1} |W_j|^{-p}; value is C_w = (sum)^(1/p)."""
    p = space.p
    k = family.kind

    def root(s, how):
        return SeriesVerdict("converges_analytic", value=s ** (1.0 / p), evidence={"sum": s, "method": how})

    if k == "constant":
        lam = family.value
        if lam > 1:
            return root(1.0 / (lam**p - 1.0), "geometric")
        return SeriesVerdict("diverges_witness", witness={
            "kind": "terms", "window": [1, None], "lower_bound": 1.0,
            "note": "every term |W_j|^-p = lambda^(-jp) is at least 1"})
    if k in ("power", "ratio_power"):
        s = family.value * p if k == "power" else (1.0 + family.value) * p / family.p
        if s > 1:
            z = special.zeta(s, 1) if k == "power" else special.zeta(s, 2)
            return root(float(z), "zeta")
        return SeriesVerdict("diverges_witness", witness={
            "kind": "dyadic_blocks", "window": "[N, 2N) for every N >= 1",
            "lower_bound": 2.0 ** (-s) if k == "power" else 1.0 / 3.0,
            "note": f"terms decay like j^-{s:g} with exponent <= 1"})
    if k == "exp_log_power":
        eps = family.value
        if eps > 0 or (eps == 0 and p > 1):
            return root(math.exp(_exp_log_tail(eps, p, 0)), "partial sum + integral tail")
        v = numeric_series(lambda j: -p * family.log_abs_W(j))
        return v
    if k == "explicit":
        L = len(family.weights)
        lt = -p * family.log_abs_W(np.arange(1, L + 1))
        return SeriesVerdict("inconclusive", evidence={
            "reason": "explicit family is finite; the tail is unknown",
            "partial_sum": float(np.exp(lt).sum()), "terms": L})
    return numeric_series(lambda j: -p * family.log_abs_W(j))


@dataclass
class BoundedReport:
    bounded: bool
    sup_estimate: float
    limsup_estimate: float
    method: str  # "analytic" or "numeric"


def bounded_check(family: WeightFamily, probe_horizon: int = 10_000) -> BoundedReport:
    if probe_horizon < 1:
        raise ValueError("probe_horizon must be >= 1")
    k, v = family.kind, family.value
    if k == "constant":
        return BoundedReport(True, v, v, "analytic")
    if k == "power":
        if v >= 0:
            return BoundedReport(True, 2.0**v, 1.0, "analytic")
        return BoundedReport(True, 1.0, 1.0, "analytic")
    if k == "ratio_power":
        a = (1.0 + v) / family.p
        return BoundedReport(True, max(2.0**a, 1.0), 1.0, "analytic")
    if k == "exp_log_power":
        # w_n -> 1 analytically; the maximum sits at small n
        n = np.arange(1, min(probe_horizon, 10_000) + 1)
        sup = float(np.exp(family.log_abs_w(n).max()))
        return BoundedReport(True, max(sup, 1.0), 1.0, "analytic")
    H = probe_horizon if family.length is None else min(probe_horizon, family.length)
    lw = family.log_abs_w(np.arange(1, H + 1))
    sup = float(np.exp(lw.max()))
    lim = float(np.exp(lw[H // 2:].max()))
    return BoundedReport(bool(np.isfinite(sup)), sup, lim, "numeric")


def point_spectrum_radius(family: WeightFamily, space: SpaceConfig, window=(1, 10_000)) -> float:
    """r = 1 / limsup |W_n|^(-1/n), estimated over the window."""
    lo, hi = int(window[0]), int(window[1])
    if hi < lo or lo < 1:
        raise ValueError("window must be a nonempty range of positive integers")
    if family.kind == "constant":
        return family.value
    if family.length is not None:
        hi = min(hi, family.length)
    n = np.arange(lo, hi + 1)
    return float(np.exp(np.min(family.log_abs_W(n) / n)))


def family_from_config(d: dict, p: float = 1.0) -> WeightFamily:
    """Build a family from a tagged record such as {kind: constant, lambda: 2}."""
    d = dict(d)
    kind = d.pop("kind")
    if kind == "constant":
        return WeightFamily.constant(d["lambda"])
    if kind == "power":
        return WeightFamily.power(d["beta"])
    if kind == "ratio_power":
        return WeightFamily.ratio_power(d["eps"], d.get("p", p))
    if kind == "exp_log_power":
        return WeightFamily.exp_log_power(d["eps"])
    if kind == "explicit":
        return WeightFamily.explicit([_to_complex(w) for w in d["weights"]])
    raise ValueError(f"weight kind {kind!r} cannot be built from a config record")


def _to_complex(w) -> complex:
    if isinstance(w, (list, tuple)):
        return complex(float(w[0]), float(w[1]))
    return complex(w)
