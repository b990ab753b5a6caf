"""Random coefficients X_j and the vector constructions built from them.

X_j is a pure function of (master_seed, realisation, j): the Philox block with
counter j under a key derived from the seeds supplies two uniforms, turned into
a complex normal by Box-Muller.  Any index range can be drawn in any order or
in parallel and gives the same numbers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .adapted_basis import AdaptedBasis
from .arith import block_indices, family_of_block
from .core import SpaceConfig, SparseVec, combine
from .weights import WeightFamily, fhc_constant

_U53 = 2.0**-53


@dataclass(frozen=True)
class DistributionSpec:
    kind: str = "gaussian"  # gaussian | uniform_disk | custom
    radius: float = 1.0
    transform: Optional[Callable] = field(default=None, compare=False)  # (u1, u2) -> complex array
    moment_p: Optional[float] = None  # declared E|X|^q for custom kinds
    moment_order: Optional[float] = None  # the q above
    tail: Optional[Callable] = field(default=None, compare=False)  # r -> P(|X| >= r)
    name: str = ""

    def __post_init__(self):
        if self.kind not in ("gaussian", "uniform_disk", "custom"):
            raise ValueError(f"unknown distribution kind {self.kind!r}")
        if self.kind == "custom" and self.transform is None and self.tail is None:
            raise ValueError("custom distribution needs a transform or an analytic tail")

    def abs_moment(self, q: float) -> float:
        """E|X|^q."""
        if self.kind == "gaussian":
            return math.gamma(1.0 + q / 2.0)
        if self.kind == "uniform_disk":
            return 2.0 * self.radius**q / (q + 2.0)
        if self.moment_p is None or self.moment_order != q:
            raise ValueError(f"custom distribution declares no moment of order {q}")
        return self.moment_p

    def from_uniforms(self, u1: np.ndarray, u2: np.ndarray) -> np.ndarray:
        if self.kind == "gaussian":
            return np.sqrt(-np.log(u1)) * np.exp(2j * np.pi * u2)
        if self.kind == "uniform_disk":
            return self.radius * np.sqrt(u1) * np.exp(2j * np.pi * u2)
        if self.transform is None:
            raise ValueError("custom distribution without transform cannot be sampled")
        return np.asarray(self.transform(u1, u2), np.complex128)

    def describe(self) -> dict:
        d = {"kind": self.kind}
        if self.kind == "uniform_disk":
            d["radius"] = self.radius
        if self.kind == "custom":
            d.update(name=self.name, moment_p=self.moment_p, moment_order=self.moment_order)
        return d


def seed_key(seed) -> np.ndarray:
    """Philox key from an int or a tuple of ints (stable mixing via SeedSequence)."""
    entropy = [int(s) & (2**64 - 1) for s in (seed if isinstance(seed, (tuple, list)) else (seed,))]
    return np.random.SeedSequence(entropy).generate_state(2, np.uint64)


def _blocks(key: np.ndarray, j0: int, count: int) -> np.ndarray:
    bg = np.random.Philox(key=key, counter=np.array([j0, 0, 0, 0], dtype=np.uint64))
    return bg.random_raw(4 * count).reshape(count, 4)


def _uniforms(key, j0: int, count: int):
    w = _blocks(key, j0, count)
    u1 = ((w[:, 0] >> np.uint64(11)).astype(np.float64) + 1.0) * _U53  # (0, 1]
    u2 = (w[:, 1] >> np.uint64(11)).astype(np.float64) * _U53  # [0, 1)
    return u1, u2


def sample_range(dist: DistributionSpec, seed, j0: int, j1: int) -> np.ndarray:
    """X_j for j in [j0, j1)."""
    if j0 < 0 or j1 < j0:
        raise ValueError("need 0 <= j0 <= j1")
    if j1 == j0:
        return np.zeros(0, np.complex128)
    u1, u2 = _uniforms(seed_key(seed), j0, j1 - j0)
    return dist.from_uniforms(u1, u2)


def sample_X(dist: DistributionSpec, seed, j):
    """X_j for a single index or an index array."""
    if np.ndim(j) == 0:
        return complex(sample_range(dist, seed, int(j), int(j) + 1)[0])
    j = np.asarray(j, dtype=np.int64)
    if j.size == 0:
        return np.zeros(0, np.complex128)
    lo, hi = int(j.min()), int(j.max())
    if lo < 0:
        raise ValueError("indices must be nonnegative")
    if hi - lo < 4 * j.size + 4096:
        return sample_range(dist, seed, lo, hi + 1)[j - lo]
    uniq, inv = np.unique(j, return_inverse=True)
    vals = np.array([sample_range(dist, seed, int(u), int(u) + 1)[0] for u in uniq])
    return vals[inv]


@dataclass(frozen=True)
class RandomVectorSpec:
    dist: DistributionSpec = field(default_factory=DistributionSpec)
    master_seed: int = 0
    J_max: Optional[int] = None
    m: Optional[int] = None
    gamma: int = 2
    construction: str = "single"  # single | common_weights | common_poly
    seed: int = 0  # realisation, mixed with master_seed
    force_X: Optional[Callable] = field(default=None, compare=False)

    def __post_init__(self):
        if self.construction not in ("single", "common_weights", "common_poly"):
            raise ValueError(f"unknown construction {self.construction!r}")
        if self.construction != "single" and self.m is not None:
            if not (self.m >= self.gamma + 1 >= 3):
                raise ValueError("need m >= gamma + 1 >= 3")
            if self.J_max is not None and self.J_max < self.m:
                raise ValueError("need J_max >= m")

    @property
    def key(self) -> tuple:
        return (int(self.master_seed), int(self.seed))

    def X(self, j0: int, j1: int) -> np.ndarray:
        if self.force_X is not None:
            j = np.arange(j0, j1)
            return np.broadcast_to(np.asarray(self.force_X(j), np.complex128), j.shape).copy()
        return sample_range(self.dist, self.key, j0, j1)

    def with_seed(self, seed: int) -> "RandomVectorSpec":
        return replace(self, seed=int(seed))

    def describe(self) -> dict:
        return {"dist": self.dist.describe(), "master_seed": self.master_seed, "seed": self.seed,
                "J_max": self.J_max, "m": self.m, "gamma": self.gamma, "construction": self.construction,
                "force_X": self.force_X is not None}


@dataclass
class TailBound:
    bound_expectation: float  # bound on E||sum_{j > J_max} ...||_p
    J_max: int
    per_operator: list = field(default_factory=list)
    method: str = ""
    log_bound: Optional[float] = None  # survives when bound_expectation underflows

    def __post_init__(self):
        if self.log_bound is None:
            self.log_bound = math.log(self.bound_expectation) if self.bound_expectation > 0 else -math.inf

    def to_json(self) -> dict:
        return dict(self.__dict__)


@dataclass
class BuiltVector:
    vector: SparseVec
    tail: TailBound
    spec: RandomVectorSpec
    block_table: list = field(default_factory=list)  # rows (n, first j, last j, family)
    warnings: list = field(default_factory=list)


@dataclass
class DecayReport:
    passed: bool
    method: str
    trace: list
    knee: Optional[int] = None


def decay_condition_check(dist: DistributionSpec, beta: float, trials: int = 10**6, seed=0) -> DecayReport:
    """limsup (log r)^(1+beta) P(|X| >= r) < infinity, probed at r = 2, 4, 8, ..."""
    if beta <= 0:
        raise ValueError("beta must be positive")
    if dist.kind == "gaussian":
        return DecayReport(True, "analytic", [])
    if dist.kind == "uniform_disk":
        return DecayReport(True, "analytic", [], knee=int(math.ceil(math.log2(max(dist.radius, 1.0)))) + 1)
    if dist.tail is not None:
        rs = 2.0 ** np.arange(1, 61)
        tail = np.array([float(dist.tail(r)) for r in rs])
        method = "declared tail"
    else:
        x = np.abs(sample_range(dist, seed, 0, trials))
        top = max(float(x.max()), 2.0)
        rs = 2.0 ** np.arange(1, int(math.log2(top)) + 2)
        xs = np.sort(x)
        tail = 1.0 - np.searchsorted(xs, rs, side="left") / trials
        method = "empirical"
    g = np.log(rs) ** (1.0 + beta) * tail
    knee = int(np.argmax(g))
    after = g[knee:]
    ok = knee < len(g) // 2 and bool(np.all(np.diff(after) <= 1e-15 * max(after.max(), 1e-300)))
    return DecayReport(ok, method, [[float(r), float(v)] for r, v in zip(rs, g)], knee)


# ---------------------------------------------------------------------------
# interleave parameter

def select_m_geometric(gamma: int, M: float, eta: float) -> int:
    """Smallest m >= max(2 gamma, gamma (4 log M - log eta) / |log eta|) + 1."""
    if not 0 < eta < 1:
        raise ValueError("eta must lie in (0, 1)")
    if not M > 1:
        raise ValueError("M must exceed 1")
    if gamma < 2:
        raise ValueError("gamma must be >= 2")
    x = max(2 * gamma, gamma * (4 * math.log(M) - math.log(eta)) / abs(math.log(eta))) + 1
    return int(math.ceil(x - 1e-12))


def select_m_poly(gamma: int, C: float, rho: float, eta_slack: float) -> int:
    """Smallest integer strictly above max(2 gamma, gamma log((1+eta) C) / -log rho)."""
    if not 0 <= rho < 1:
        raise ValueError("rho must lie in [0, 1)")
    if C < 1 or eta_slack <= 0 or gamma < 2:
        raise ValueError("need C >= 1, eta_slack > 0, gamma >= 2")
    second = 0.0 if rho == 0 else gamma * math.log((1 + eta_slack) * C) / -math.log(rho)
    return int(math.floor(max(2 * gamma, second))) + 1


# ---------------------------------------------------------------------------
# builders

def _ownership(js: np.ndarray, m: int, F: int) -> np.ndarray:
    """0-based family index for each j >= m."""
    return family_of_block(block_indices(js, m), F) - 1


def block_table(m: int, J: int, F: int) -> list:
    rows, n = [], 1
    while m**n <= J:
        rows.append([n, m**n, min(m ** (n + 1) - 1, J), int(family_of_block(n, F))])
        n += 1
    return rows


def build_Z_single(family: WeightFamily, spec: RandomVectorSpec, space: SpaceConfig) -> BuiltVector:
    verdict = fhc_constant(family, space)
    if verdict.status == "diverges_witness":
        raise ValueError("sum |W_j|^-p diverges; the shift is not frequently hypercyclic")
    if spec.J_max is None:
        raise ValueError("J_max must be set")
    J = int(spec.J_max)
    js = np.arange(1, J + 1)
    x = spec.X(1, J + 1)
    ph = -family.phase_W(js) if family.has_phase else None
    vec = _scaled(js, x, -family.log_abs_W(js), ph)
    tail = _weights_tail([family], J, spec, space)
    warn = [] if verdict.converges else [f"frequent hypercyclicity not confirmed ({verdict.status})"]
    return BuiltVector(vec, tail, spec, [], warn)


def _scaled(js, x, logf, ph) -> SparseVec:
    keep = x != 0
    v = SparseVec(js[keep], x[keep])
    return v.scale_log(logf[keep], None if ph is None else ph[keep])


def _weights_tail(families, J, spec, space) -> TailBound:
    p = space.p
    per = []
    for f in families:
        try:
            per.append(f.log_tail_sum(J, p))
        except ValueError:
            per.append(math.inf)
    tot = float(np.logaddexp.reduce(per)) if per else -math.inf
    try:
        mom = spec.dist.abs_moment(p)
    except ValueError:
        mom = math.inf
    lb = (math.log(mom) + tot) / p if tot > -math.inf else -math.inf
    bound = math.exp(lb) if lb < 700 else math.inf
    return TailBound(bound, J, [math.exp(t / p) if t < 700 else math.inf for t in per],
                     "(E|X|^p sum_f sum_{j>J} |W_j(f)|^-p)^(1/p)", float(lb))


def build_Z_common_weights(families: Sequence[WeightFamily], spec: RandomVectorSpec,
                           space: SpaceConfig) -> BuiltVector:
    if spec.m is None or spec.J_max is None:
        raise ValueError("m and J_max must be set")
    m, J, F = int(spec.m), int(spec.J_max), len(families)
    js = np.arange(m, J + 1)
    x = spec.X(m, J + 1)
    own = _ownership(js, m, F)
    logf = np.empty(js.size)
    ph = np.zeros(js.size)
    for f, fam in enumerate(families):
        sel = own == f
        logf[sel] = -fam.log_abs_W(js[sel])
        if fam.has_phase:
            ph[sel] = -fam.phase_W(js[sel])
    vec = _scaled(js, x, logf, ph if any(f.has_phase for f in families) else None)
    warn = []
    for i, fam in enumerate(families):
        v = fhc_constant(fam, space)
        if not v.converges:
            warn.append(f"family {i + 1}: {v.status}")
    if spec.dist.kind != "gaussian" and any(f.kind != "constant" for f in families):
        warn.append("non-gaussian coefficients outside the geometric-growth regime")
    return BuiltVector(vec, _weights_tail(families, J, spec, space), spec, block_table(m, J, F), warn)


def build_Z_common_poly(bases: Sequence[AdaptedBasis], spec: RandomVectorSpec,
                        space: SpaceConfig) -> BuiltVector:
    if spec.m is None or spec.J_max is None:
        raise ValueError("m and J_max must be set")
    m, J, F = int(spec.m), int(spec.J_max), len(bases)
    short = [i for i, b in enumerate(bases) if b.K < J]
    if short:
        raise IndexError(f"bases {short} are built below J_max={J}")
    js = np.arange(m, J + 1)
    x = spec.X(m, J + 1)
    own = _ownership(js, m, F)
    parts = []
    for f, basis in enumerate(bases):
        coef = np.zeros(J + 1, np.complex128)
        sel = own == f
        coef[js[sel]] = x[sel]
        if not np.any(coef):
            continue
        scaled = basis.b[: J + 1, : J + 1] @ coef
        rows = np.nonzero(scaled)[0]
        ph = -basis.phase_w[rows] if basis.family.has_phase else None
        parts.append((1.0, SparseVec(rows, scaled[rows]).scale_log(-basis.log_w[rows], ph)))
    vec = combine(parts)
    try:
        mom = spec.dist.abs_moment(1.0)
    except ValueError:
        mom = math.inf
    per = [b.cw * b.rho ** (J + 1) / (1 - b.rho) for b in bases]
    return BuiltVector(vec, TailBound(mom * sum(per), J, per, "E|X| sum_f C_f rho_f^(J+1) / (1 - rho_f)"),
                       spec, block_table(m, J, F), [])


def norm_bound_poly(bases: Sequence[AdaptedBasis], x: np.ndarray, m: int) -> float:
    """sum_j |X_j| C_f rho_f^j over j = m..len(x)-1."""
    js = np.arange(m, len(x))
    own = _ownership(js, m, len(bases))
    c = np.array([b.cw for b in bases])[own]
    r = np.array([b.rho for b in bases])[own]
    return float(np.sum(np.abs(x[m:]) * c * r**js))


def expected_norm_p_weights(families, m: int, J: int, space: SpaceConfig, dist: DistributionSpec) -> float:
    """E||Z||_p^p for the truncated interleaved vector: E|X|^p sum_j |W_f(j)(j)|^-p."""
    js = np.arange(m, J + 1)
    own = _ownership(js, m, len(families))
    lt = np.empty(js.size)
    for f, fam in enumerate(families):
        sel = own == f
        lt[sel] = -space.p * fam.log_abs_W(js[sel])
    return dist.abs_moment(space.p) * float(np.exp(lt).sum())
