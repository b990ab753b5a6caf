"""Orbit hit times, window coverage and the experiment runner.

A step n counts as a hit only when it is certain: the distance over the first
``reach`` coordinates plus a rigorous bound on everything beyond stays below
eps.  Steps where the bound straddles eps are counted as ``uncertain`` and
treated as misses.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .adapted_basis import build_adapted_basis
from .arith import DensityEstimate, block_index, default_burn_in, density_estimate, family_of_block
from .core import SpaceConfig, SparseVec, lp_dist
from .randvec import (RandomVectorSpec, _ownership, build_Z_common_weights, build_Z_single)
from .shift_ops import PolynomialSpec, ShiftOperator, apply_polynomial
from .weights import WeightFamily, bounded_check

LOG_CLIP = 300.0
CHUNK = 2048


class ExperimentRejected(ValueError):
    pass


@dataclass(frozen=True)
class OperatorSpec:
    """B_w, or P(B_w) when ``poly`` is set."""

    family: WeightFamily
    poly: Optional[PolynomialSpec] = None

    @classmethod
    def coerce(cls, op) -> "OperatorSpec":
        if isinstance(op, OperatorSpec):
            return op
        if isinstance(op, ShiftOperator):
            return cls(op.weights)
        if isinstance(op, WeightFamily):
            return cls(op)
        P, S = op
        return cls(S.weights if isinstance(S, ShiftOperator) else S, P)

    def describe(self) -> dict:
        d = {"family": self.family.describe()}
        if self.poly is not None:
            d["poly"] = self.poly.describe()
        return d

    def label(self) -> str:
        f = self.family.describe()
        base = f"B[{f['kind']}:{f.get('value', '')}]"
        if self.poly is None:
            return base
        terms = [f"{c.real:g}" + (f"{c.imag:+g}i" if c.imag else "") + f"*{base}^{i + 1}"
                 for i, c in enumerate(self.poly.coeffs) if c != 0]
        return " + ".join(terms)


def _target_dense(h: SparseVec, R: int) -> np.ndarray:
    if h.degree > R:
        raise ValueError(f"target degree {h.degree} exceeds reach {R}")
    return h.dense(R + 1)


def _dist_rows(c: np.ndarray, hd: np.ndarray, p: float) -> np.ndarray:
    diff = np.abs(c - hd[None, :])
    if p == 2:
        return np.sqrt(np.einsum("ij,ij->i", diff, diff))
    if p == 1:
        return diff.sum(axis=1)
    return (diff**p).sum(axis=1) ** (1.0 / p)


def _log_suffix(logs: np.ndarray) -> np.ndarray:
    """out[j] = log sum_{q >= j} exp(logs[q]); one trailing -inf slot."""
    out = np.full(logs.size + 1, -np.inf)
    if logs.size:
        with np.errstate(invalid="ignore"):
            out[:-1] = np.logaddexp.accumulate(logs[::-1])[::-1]
    return out


@dataclass
class OrbitTrace:
    n: np.ndarray
    dist: np.ndarray  # distance over the first reach+1 coordinates (inf when clipped)
    bound: np.ndarray  # bound on the remaining part of the distance

    def hits(self, eps: float) -> np.ndarray:
        return self.n[self.dist + self.bound < eps]

    def uncertain(self, eps: float) -> int:
        return int(np.count_nonzero((self.dist + self.bound >= eps) & (self.dist - self.bound < eps)))


class ShiftOrbit:
    """Orbit of a materialised vector Z under B_w."""

    def __init__(self, family: WeightFamily, Z: SparseVec, space: SpaceConfig, reach: int = 64,
                 tail: float = 0.0, log_tail: Optional[float] = None):
        if reach < 0:
            raise ValueError("reach must be nonnegative")
        self.family, self.space, self.R = family, space, int(reach)
        p = space.p
        J = max(Z.degree, 0)
        self.J = J
        LZ = np.full(J + 1, -np.inf)
        PZ = np.zeros(J + 1)
        if len(Z):
            LZ[Z.idx] = Z.log_abs()
            PZ[Z.idx] = Z.phase()
        top = J + self.R + 1
        js = np.arange(top + 1)
        self.LW = family.log_abs_W(js)
        self.PW = family.phase_W(js) if family.has_phase else np.zeros(top + 1)
        self.A = LZ + self.LW[: J + 1]
        self.PA = PZ + self.PW[: J + 1]
        self.LSZ = _log_suffix(p * LZ)
        lw = family.log_abs_w(np.arange(1, J + 2))
        # suffix max of log|w_q| over q in (R, J]
        self.logS_R = float(lw[self.R:].max()) if lw[self.R:].size else -np.inf
        self.logS = math.log(bounded_check(family).sup_estimate)
        if log_tail is None:
            log_tail = math.log(tail) if tail > 0 else -np.inf
        self.logT = float(log_tail)

    def log_tail_bound(self, n: np.ndarray) -> np.ndarray:
        p = self.space.p
        k = np.minimum(n + self.R + 1, self.J + 1)
        own = np.where(np.isfinite(self.LSZ[k]), n * self.logS_R + self.LSZ[k] / p, -np.inf)
        return np.logaddexp(own, n * self.logS + self.logT)

    def evaluate(self, n: np.ndarray, h: SparseVec) -> OrbitTrace:
        n = np.asarray(n, dtype=np.int64)
        hd = _target_dense(h, self.R)
        i = np.arange(self.R + 1)
        dist = np.empty(n.size)
        for s in range(0, n.size, CHUNK):
            nn = n[s: s + CHUNK]
            jj = nn[:, None] + i[None, :]
            valid = jj <= self.J
            jc = np.minimum(jj, self.J)
            logc = np.where(valid, self.A[jc] - self.LW[i][None, :], -np.inf)
            clipped = (logc > LOG_CLIP).any(axis=1)
            ph = self.PA[jc] - self.PW[i][None, :]
            c = np.exp(np.minimum(logc, LOG_CLIP)) * np.exp(1j * ph)
            d = _dist_rows(c, hd, self.space.p)
            d[clipped] = np.inf
            dist[s: s + CHUNK] = d
        lb = self.log_tail_bound(n)
        return OrbitTrace(n, dist, np.exp(np.minimum(lb, 700.0)))


class PolyOrbit:
    """Orbits of the common vector sum_j X_j u_j^(f(j)) under the polynomial operators.

    The vector is never materialised: operator k sends sum_t X_{t+n} u_t^(k)
    to the visible part, other families enter only through norm bounds.
    """

    def __init__(self, ops: Sequence[OperatorSpec], spec: RandomVectorSpec, space: SpaceConfig,
                 reach: Sequence[int], J: int):
        self.ops, self.space, self.spec = list(ops), space, spec
        self.F = len(self.ops)
        self.m = int(spec.m)
        self.J = int(J)
        if self.J < self.m:
            raise ValueError("J_max must be >= m")
        p = space.p
        x = spec.X(0, self.J + 1)
        x[: self.m] = 0
        js = np.arange(self.m, self.J + 1)
        own = np.full(self.J + 1, -1)
        own[self.m:] = _ownership(js, self.m, self.F)
        self.R = [int(r) for r in reach]
        self.bases, self.xown, self.LSX, self.logM, self.logBeyond, self.LW = [], [], [], [], [], []
        try:
            mom = spec.dist.abs_moment(1.0)
        except ValueError:
            mom = math.inf
        jall = np.arange(self.J + 1)
        with np.errstate(divide="ignore"):
            logx = np.log(np.abs(x))
        for k, op in enumerate(self.ops):
            basis = build_adapted_basis(op.poly, op.family, self.R[k], space)
            self.bases.append(basis)
            sel = own == k
            self.xown.append(np.where(sel, x, 0))
            lr = math.log(basis.rho)
            self.LSX.append(_log_suffix(np.where(sel, logx + jall * lr, -np.inf)))
            self.logBeyond.append(math.log(mom) + self._first_owned_beyond(k) * lr - math.log1p(-basis.rho))
            S = bounded_check(op.family).sup_estimate
            self.logM.append(math.log(sum(abs(c) * S ** (i + 1) for i, c in enumerate(op.poly.coeffs))))
            self.LW.append(op.family.log_abs_W(np.arange(self.R[k] + 1)))

    def _first_owned_beyond(self, f: int) -> float:
        """Smallest j > J_max owned by family f."""
        n = n0 = block_index(self.J + 1, self.m)[0]
        while int(family_of_block(n, self.F)) - 1 != f:
            n += 1
        return float(self.J + 1) if n == n0 else float(self.m) ** n

    def _log_tail_W(self, f: int, n: np.ndarray) -> np.ndarray:
        """(1/p) log sum_{i >= n} |W_i(f)|^-p."""
        fam, p = self.ops[f].family, self.space.p
        if fam.kind == "constant":
            ll = math.log(fam.value)
            return (-n * p * ll - math.log(-math.expm1(-p * ll))) / p
        return np.array([fam.log_tail_sum(int(v) - 1, p) for v in n]) / p

    def log_tail_bound(self, k: int, n: np.ndarray) -> np.ndarray:
        b = self.bases[k]
        lr = math.log(b.rho)
        idx = np.minimum(n + self.R[k] + 1, self.J + 1)
        own = math.log(b.cw) - n * lr + np.logaddexp(self.LSX[k][idx], self.logBeyond[k])
        terms = [own]
        for f in range(self.F):
            if f == k:
                continue
            inside = np.logaddexp(self.LSX[f][np.minimum(n, self.J + 1)], self.logBeyond[f])
            terms.append(n * self.logM[k] + self._log_tail_W(f, n) + inside)
        return np.logaddexp.reduce(np.vstack(terms), axis=0)

    def log_beyond_bound(self, k: int, n: np.ndarray) -> np.ndarray:
        """The part of the bound that rests on E|X| beyond J_max."""
        b = self.bases[k]
        terms = [math.log(b.cw) - n * math.log(b.rho) + self.logBeyond[k]]
        for f in range(self.F):
            if f != k:
                terms.append(n * self.logM[k] + self._log_tail_W(f, n) + self.logBeyond[f])
        return np.logaddexp.reduce(np.vstack(terms), axis=0)

    def evaluate(self, k: int, n: np.ndarray, h: SparseVec) -> OrbitTrace:
        n = np.asarray(n, dtype=np.int64)
        R = self.R[k]
        if n.size and n.max() + R > self.J:
            raise ValueError(f"step {int(n.max())} + reach {R} exceeds J_max={self.J}")
        hd = _target_dense(h, R)
        t = np.arange(R + 1)
        b = self.bases[k].b[: R + 1, : R + 1]
        scale = np.exp(-np.minimum(self.LW[k], 700))
        if self.ops[k].family.has_phase:
            scale = scale * np.exp(-1j * self.bases[k].phase_w[: R + 1])
        dist = np.empty(n.size)
        for s in range(0, n.size, CHUNK // 4):
            nn = n[s: s + CHUNK // 4]
            xw = self.xown[k][nn[:, None] + t[None, :]]
            v = (xw @ b.T) * scale[None, :]
            dist[s: s + nn.size] = _dist_rows(v, hd, self.space.p)
        lb = self.log_tail_bound(k, n)
        return OrbitTrace(n, dist, np.exp(np.minimum(lb, 700.0)))


# ---------------------------------------------------------------------------
# public helpers

def hit_times(op, Z: SparseVec, h: SparseVec, eps: float, horizon: int, space: SpaceConfig,
              reach: Optional[int] = None, tail: float = 0.0, return_trace: bool = False):
    """Sorted n in [1, horizon] with ||op^n Z - h||_p < eps."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    op = OperatorSpec.coerce(op)
    n = np.arange(1, horizon + 1)
    if op.poly is None:
        R = max(64 if reach is None else int(reach), h.degree, 0)
        tr = ShiftOrbit(op.family, Z, space, R, tail).evaluate(n, h)
    else:
        tr = _poly_direct(op, Z, h, horizon, space)
    hits = [int(x) for x in tr.hits(eps)]
    return (hits, tr) if return_trace else hits


def _poly_direct(op: OperatorSpec, Z: SparseVec, h: SparseVec, horizon: int, space: SpaceConfig) -> OrbitTrace:
    """Exact iteration for finitely supported Z (each step lowers the degree)."""
    S = ShiftOperator(op.family)
    v = Z
    dist = np.empty(horizon)
    for i in range(horizon):
        v = apply_polynomial(op.poly, S, v)
        dist[i] = lp_dist(v, h, space)
    return OrbitTrace(np.arange(1, horizon + 1), dist, np.zeros(horizon))


def window_coverage(hits, m: int, gamma: int, k: int, n_range) -> float:
    """Fraction of windows [m^n, gamma m^n], n in R_k and n_range, holding a hit."""
    lo, hi = int(n_range[0]), int(n_range[1])
    if lo < 1 or hi < lo:
        raise ValueError("n_range must satisfy 1 <= lo <= hi")
    ns = [n for n in range(lo, hi + 1) if (n & -n).bit_length() == k]
    if not ns:
        raise ValueError(f"no block of R_{k} in [{lo}, {hi}]")
    h = np.asarray(sorted(hits), dtype=np.int64)
    got = 0
    for n in ns:
        a, b = m**n, int(gamma * m**n)
        i = np.searchsorted(h, a)
        got += bool(i < h.size and h[i] <= b)
    return got / len(ns)


def _windows(k: int, m: int, gamma: int, n_range) -> list:
    lo, hi = int(n_range[0]), int(n_range[1])
    return [(n, m**n, int(gamma * m**n)) for n in range(lo, hi + 1) if (n & -n).bit_length() == k]


def scan_windows(evaluate, windows, eps_list, chunk: int = 256) -> dict:
    """First certain hit per (window, eps), scanning each window in order."""
    out = {}
    for n, a, b in windows:
        todo = sorted(set(eps_list))
        found = {e: None for e in todo}
        unc = {e: 0 for e in todo}
        s = a
        while s <= b and todo:
            ns = np.arange(s, min(s + chunk, b + 1))
            tr = evaluate(ns)
            for e in list(todo):
                hs = tr.hits(e)
                if hs.size:
                    found[e] = int(hs[0])
                    cut = tr.n < hs[0]
                    unc[e] += OrbitTrace(tr.n[cut], tr.dist[cut], tr.bound[cut]).uncertain(e)
                    todo.remove(e)
                else:
                    unc[e] += tr.uncertain(e)
            s += chunk
        out[n] = {"window": [a, b], "first_hit": found, "uncertain": unc}
    return out


def default_target_grid(space: SpaceConfig, max_degree: int, coeff_grid) -> list:
    grid = list(dict.fromkeys(complex(c) for c in coeff_grid))
    if not grid or max_degree < 0:
        raise ValueError("grids must be nonempty")
    size = len(grid) ** (max_degree + 1)
    if size > 10_000:
        raise ValueError(f"target grid has {size} points (limit 10^4)")
    seen, out = set(), [SparseVec()]
    seen.add(())
    for combo in itertools.product(grid, repeat=max_degree + 1):
        key = tuple((i, c) for i, c in enumerate(combo) if c != 0)
        if key in seen:
            continue
        seen.add(key)
        out.append(SparseVec.from_dict(dict(key)))
    return out


# ---------------------------------------------------------------------------
# experiments

@dataclass
class Experiment:
    operators: list
    vector: RandomVectorSpec
    targets: list
    epsilons: list
    horizon: int
    seeds: list
    space: SpaceConfig
    reach: Optional[int] = None
    coverage_range: Optional[tuple] = None
    scan: str = "full"  # full | windows
    workers: int = 1
    burn_in: Optional[int] = None
    keep_traces: bool = False

    def __post_init__(self):
        self.operators = [OperatorSpec.coerce(o) for o in self.operators]
        if self.burn_in is None:
            self.burn_in = default_burn_in(self.horizon)
        if self.horizon < 10 * self.burn_in:
            raise ValueError("horizon must be at least 10 * burn_in")
        if any(e <= 0 for e in self.epsilons):
            raise ValueError("epsilons must be positive")
        if self.scan not in ("full", "windows"):
            raise ValueError("scan must be 'full' or 'windows'")
        if self.scan == "windows" and self.coverage_range is None:
            raise ValueError("window scanning needs coverage_range")
        c = self.vector.construction
        polys = [o.poly is not None for o in self.operators]
        if c == "common_poly" and not all(polys):
            raise ValueError("common_poly vectors need polynomial operators")
        if c != "common_poly" and any(polys):
            raise ValueError("polynomial operators need a common_poly vector")
        if c == "single" and len(self.operators) != 1:
            raise ValueError("single construction takes exactly one operator")
        if c != "single" and self.vector.m is None:
            raise ValueError("interleaved constructions need m")

    def max_step(self) -> int:
        if self.scan == "windows":
            m, g = self.vector.m, self.vector.gamma
            F = len(self.operators)
            ends = [int(g * m**n) for n in range(self.coverage_range[0], self.coverage_range[1] + 1)
                    if (n & -n).bit_length() <= F]
            if not ends:
                raise ValueError("coverage_range holds no block owned by an operator")
            return max(ends)
        return self.horizon

    def last_step(self, k: int) -> int:
        """Last step evaluated for operator k (0-based)."""
        if self.scan == "windows":
            ws = _windows(k + 1, self.vector.m, self.vector.gamma, self.coverage_range)
            return max([b for _, _, b in ws] + [1])
        return self.horizon

    def describe(self) -> dict:
        return {"operators": [o.describe() for o in self.operators], "vector": self.vector.describe(),
                "targets": [t.dumps() for t in self.targets], "epsilons": list(self.epsilons),
                "horizon": self.horizon, "seeds": list(self.seeds), "p": self.space.p,
                "reach": self.reach, "coverage_range": self.coverage_range, "scan": self.scan,
                "burn_in": self.burn_in}


@dataclass
class HitRecord:
    operator: int
    target: int
    eps: float
    seed: int
    hits: np.ndarray
    density: Optional[DensityEstimate]
    window_coverage: Optional[float]
    uncertain: int = 0
    windows: Optional[dict] = None
    trace: Optional[OrbitTrace] = field(default=None, repr=False)

    def csv_row(self) -> list:
        d = self.density
        return [self.operator, self.target, repr(float(self.eps)), self.seed,
                "" if d is None else repr(d.final_ratio), "" if d is None else repr(d.running_min_ratio),
                "" if self.window_coverage is None else repr(self.window_coverage)]

    def to_json(self) -> dict:
        return {"operator": self.operator, "target": self.target, "eps": self.eps, "seed": self.seed,
                "hit_count": int(len(self.hits)), "first_hits": [int(x) for x in self.hits[:20]],
                "density": None if self.density is None else self.density.to_json(),
                "window_coverage": self.window_coverage, "uncertain": self.uncertain,
                "windows": self.windows}


CSV_HEADER = ["operator", "target", "eps", "seed", "final_ratio", "min_ratio", "coverage"]


def default_J_max(exp: Experiment, reach: int) -> int:
    """gamma m^(n*+1) with n* the last block touched, never below the orbit's reach."""
    v = exp.vector
    if v.J_max is not None:
        return int(v.J_max)
    top = exp.max_step()
    if v.construction == "single" or v.m is None:
        return top + reach + 64
    n_star = block_index(max(top, v.m), v.m)[0]
    return max(int(v.gamma) * v.m ** (n_star + 1), top + reach + 64)


J_CAP = 1 << 22


def _poly_reach(op: OperatorSpec, space, eps_min: float, h_deg: int) -> int:
    from .shift_ops import admissibility
    from .weights import fhc_constant
    rho = 1.0 / admissibility(op.poly)[0]
    C = fhc_constant(op.family, space).value or 1.0
    R = math.log(1e-3 * eps_min * (1 - rho) / (6 * C)) / math.log(rho)
    return int(min(max(math.ceil(R), h_deg, 1), 4000))


class _Plan:
    def __init__(self, exp: Experiment):
        self.exp = exp
        eps_min = min(exp.epsilons) if exp.epsilons else 1.0
        h_deg = max([t.degree for t in exp.targets] + [0])
        if exp.vector.construction == "common_poly":
            self.reach = [exp.reach or _poly_reach(o, exp.space, eps_min, h_deg) for o in exp.operators]
            J = default_J_max(exp, max(self.reach))
            if exp.vector.J_max is None:
                J = min(J, J_CAP)
            if exp.max_step() + max(self.reach) > J:
                raise ExperimentRejected(f"J_max={J} is below the last step plus reach; raise J_max")
        else:
            self.reach = [max(exp.reach or 64, h_deg)] * len(exp.operators)
            J = default_J_max(exp, self.reach[0])
            if J > J_CAP and exp.vector.J_max is None:
                raise ExperimentRejected(f"default J_max={J} exceeds {J_CAP}; set J_max explicitly")
        self.J = J
        self.spec = replace(exp.vector, J_max=J) if exp.vector.J_max is None \
            else exp.vector

    def check_tail(self, tail_log_at_max: float):
        lim = math.log(min(self.exp.epsilons) / 4)
        if tail_log_at_max > lim:
            raise ExperimentRejected(
                f"truncation tail bound e^{tail_log_at_max:.3g} exceeds min eps/4; raise J_max (now {self.J})")


def _families(exp):
    return [o.family for o in exp.operators]


def _run_seed(exp: Experiment, plan: _Plan, seed: int) -> list:
    spec = plan.spec.with_seed(seed)
    space = exp.space
    recs = []
    cov = exp.coverage_range
    m, g = spec.m, spec.gamma
    if spec.construction == "common_poly":
        orbit = PolyOrbit(exp.operators, spec, space, plan.reach, plan.J)
        plan.check_tail(max(float(orbit.log_beyond_bound(k, np.array([exp.last_step(k)]))[0])
                            for k in range(len(exp.operators))))
        evals = [lambda ns, h, k=k: orbit.evaluate(k, ns, h) for k in range(len(exp.operators))]
    else:
        if spec.construction == "single":
            built = build_Z_single(exp.operators[0].family, spec, space)
        else:
            built = build_Z_common_weights(_families(exp), spec, space)
        orbits = [ShiftOrbit(o.family, built.vector, space, plan.reach[k], log_tail=built.tail.log_bound)
                  for k, o in enumerate(exp.operators)]
        plan.check_tail(max(exp.horizon * o.logS + o.logT for o in orbits))
        evals = [lambda ns, h, o=o: o.evaluate(ns, h) for o in orbits]
    for k, ev in enumerate(evals):
        for ti, h in enumerate(exp.targets):
            if exp.scan == "windows":
                ws = _windows(k + 1, m, g, cov)
                res = scan_windows(lambda ns: ev(ns, h), ws, exp.epsilons)
                for e in exp.epsilons:
                    hits = np.array(sorted(r["first_hit"][e] for r in res.values() if r["first_hit"][e] is not None),
                                    dtype=np.int64)
                    c = sum(r["first_hit"][e] is not None for r in res.values()) / len(res) if res else None
                    wj = {str(n): {"window": r["window"], "first_hit": r["first_hit"][e],
                                   "uncertain": r["uncertain"][e]} for n, r in res.items()}
                    recs.append(HitRecord(k, ti, e, seed, hits, None, c,
                                          sum(r["uncertain"][e] for r in res.values()), wj))
                continue
            tr = ev(np.arange(1, exp.horizon + 1), h)
            for e in exp.epsilons:
                hits = tr.hits(e)
                dens = density_estimate(hits, exp.horizon, exp.burn_in)
                c = None
                if cov is not None and m is not None and _windows(k + 1, m, g, cov):
                    c = window_coverage(hits, m, g, k + 1, cov)
                recs.append(HitRecord(k, ti, e, seed, hits, dens, c, tr.uncertain(e),
                                      trace=tr if exp.keep_traces else None))
    return recs


def run_experiment(exp: Experiment) -> list:
    """All (operator, target, eps, seed) cells, in that lexicographic order.

    Each seed fixes one realisation of the random vector, keyed on
    (master_seed, seed); every operator and target sees the same vector.
    """
    if not exp.targets or not exp.seeds or not exp.epsilons:
        return []
    plan = _Plan(exp)
    if exp.workers > 1 and len(exp.seeds) > 1:
        with ThreadPoolExecutor(max_workers=exp.workers) as pool:
            parts = list(pool.map(lambda s: _run_seed(exp, plan, s), exp.seeds))
    else:
        parts = [_run_seed(exp, plan, s) for s in exp.seeds]
    eps_pos = {e: i for i, e in enumerate(exp.epsilons)}
    seed_pos = {s: i for i, s in enumerate(exp.seeds)}
    recs = [r for part in parts for r in part]
    recs.sort(key=lambda r: (r.operator, r.target, eps_pos[r.eps], seed_pos[r.seed]))
    return recs


def experiment_J_max(exp: Experiment) -> int:
    return _Plan(exp).J
