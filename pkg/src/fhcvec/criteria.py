"""Checkers for the existence criteria and the non-existence witness search.

Every checker returns a ``Verdict`` carrying machine-readable evidence.  Numeric
verdicts are heuristics over finite windows and say so in their evidence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .arith import AlphaFamily, alpha_condition_check
from .core import SpaceConfig
from .shift_ops import PolynomialSpec, admissibility
from .weights import (SeriesVerdict, WeightFamily, bounded_check, fhc_constant, numeric_series,
                      point_spectrum_radius)

LOG_1E6 = math.log(1e6)


class CriterionError(ValueError):
    """A checker's precondition does not hold."""


@dataclass
class Verdict:
    criterion: str
    status: str  # pass | fail | inconclusive | or a SeriesVerdict status
    evidence: dict = field(default_factory=dict)
    parameters: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.status == "pass" or self.status.startswith("converges")

    def to_json(self) -> dict:
        return {"criterion": self.criterion, "status": self.status,
                "evidence": self.evidence, "parameters": self.parameters}


def _fam(f: WeightFamily) -> dict:
    return f.describe()


# ---------------------------------------------------------------------------
# geometric criterion

@dataclass(frozen=True)
class GeometricCriterionConfig:
    omega: WeightFamily
    eta: float
    M: float
    C: float

    def __post_init__(self):
        if not 0 < self.eta < 1:
            raise CriterionError("eta must lie in (0, 1)")
        if not self.M > 1:
            raise CriterionError("M must exceed 1")
        if not self.C > 0:
            raise CriterionError("C must be positive")


def _lin_sup(a: float, b: float):
    """sup over m' >= 1 of a + b m'; None when unbounded."""
    return None if b > 0 else a + b


def _lin_inf(a: float, b: float):
    return None if b < 0 else a + b


def check_geometric(families: Sequence[WeightFamily], config: GeometricCriterionConfig, space: SpaceConfig,
                    probe=(200, 200), convention: str = "literal") -> Verdict:
    """Hypotheses (i)-(iii) of the geometric-growth criterion.

    Products run over w_n ... w_{n+m'} (m'+1 factors, n >= 1) with the
    ``literal`` convention and over w_{n+1} ... w_{n+m'} with ``shifted``.
    """
    if convention not in ("literal", "shifted"):
        raise ValueError("convention must be 'literal' or 'shifted'")
    n_probe, m_probe = int(probe[0]), int(probe[1])
    if n_probe < 1 or m_probe < 1:
        raise CriterionError("probe must be nonempty")
    p = space.p
    logC, logM, logeta = math.log(config.C), math.log(config.M), math.log(config.eta)
    extra = 1 if convention == "literal" else 0
    fv = fhc_constant(config.omega, space)
    ev = {"(i)": {"status": fv.status, "C_omega": fv.value}}
    ok = fv.converges
    analytic = config.omega.kind == "constant" and all(f.kind == "constant" for f in families)
    ev["method"] = "analytic" if analytic else "probe"
    per = []
    for k, fam in enumerate(families, start=1):
        row = {"family": k}
        if analytic:
            lo, lw = math.log(config.omega.value), math.log(fam.value)
            # log of a product with m'+extra factors = (m' + extra) * log value
            s2 = _lin_sup(extra * (lo - lw), lo - logeta - lw)
            up = _lin_sup(extra * lw - logC, lw - logM)
            dn = _lin_inf(extra * lw + logC, lw + logM)
            row["(ii)"] = {"sup_log_ratio": s2, "pass": s2 is not None and s2 <= logC + 1e-12}
            row["(iii)"] = {"upper_pass": up is not None and up <= 1e-12,
                            "lower_pass": dn is not None and dn >= -1e-12}
            if not row["(ii)"]["pass"]:
                row["(ii)"]["violation"] = {"n": 1, "m'": 1 if s2 is not None else "unbounded", "side": "ratio"}
            for side, good, val in (("upper", row["(iii)"]["upper_pass"], up), ("lower", row["(iii)"]["lower_pass"], dn)):
                if not good:
                    row["(iii)"]["violation"] = {"n": 1, "m'": 1 if val is not None else "unbounded", "side": side}
                    break
        else:
            n = np.arange(1, n_probe + 1)[:, None]
            mp = np.arange(1, m_probe + 1)[None, :]
            lo_start = n - 1 + (1 - extra)  # index before the first factor
            top = n + mp
            lw_k = fam.log_abs_W(top) - fam.log_abs_W(lo_start)
            lw_o = config.omega.log_abs_W(top) - config.omega.log_abs_W(lo_start)
            ratio = lw_o - mp * logeta - lw_k
            bad2 = ratio > logC + 1e-12
            upper = lw_k > logC + mp * logM + 1e-12
            lower = lw_k < -logC - mp * logM - 1e-12
            row["(ii)"] = {"sup_log_ratio": float(ratio.max()), "pass": not bad2.any()}
            if bad2.any():
                i, j = np.argwhere(bad2)[0]
                row["(ii)"]["violation"] = {"n": int(i + 1), "m'": int(j + 1), "side": "ratio"}
            row["(iii)"] = {"upper_pass": not upper.any(), "lower_pass": not lower.any()}
            for side, bad in (("upper", upper), ("lower", lower)):
                if bad.any():
                    i, j = np.argwhere(bad)[0]
                    row["(iii)"]["violation"] = {"n": int(i + 1), "m'": int(j + 1), "side": side}
                    break
        fam_ok = row["(ii)"]["pass"] and row["(iii)"]["upper_pass"] and row["(iii)"]["lower_pass"]
        ok = ok and fam_ok
        per.append(row)
    ev["families"] = per
    params = {"families": [_fam(f) for f in families], "omega": _fam(config.omega), "eta": config.eta,
              "M": config.M, "C": config.C, "p": p, "probe": [n_probe, m_probe], "convention": convention}
    return Verdict("geometric", "pass" if ok else "fail", ev, params)


# ---------------------------------------------------------------------------
# general criterion

@dataclass(frozen=True)
class GeneralCriterionConfig:
    m: int
    gamma: int
    alpha: AlphaFamily
    decay: Optional[tuple] = None  # per family (C_k, tau_k); fitted when None
    eps_tilde: float = 0.5
    tau_default: float = 0.1

    def __post_init__(self):
        if not 2 <= self.gamma < self.m:
            raise CriterionError("need 2 <= gamma < m")


@dataclass
class RnValue:
    log_value: float  # log(first + second) up to tail_cap
    first: float
    log_second: float
    log_remainder: float
    inconclusive: bool

    @property
    def value(self) -> Optional[float]:
        return math.exp(self.log_value) if self.log_value < 709 else None

    @property
    def log_total(self) -> float:
        return float(np.logaddexp(self.log_value, self.log_remainder))


class _RnTables:
    """log|W_j(i)| tables shared across the (n, l) evaluations."""

    def __init__(self, families, upto: int):
        self.upto = upto
        j = np.arange(upto + 1)
        self.logW = [f.log_abs_W(j) for f in families]
        self.log_inf = np.min(np.vstack(self.logW), axis=0)

    def ensure(self, families, upto):
        if upto > self.upto:
            self.__init__(families, max(upto, 2 * self.upto))


def _lse(x: np.ndarray) -> float:
    if x.size == 0:
        return -math.inf
    top = float(x.max())
    if top == -math.inf:
        return top
    return top + math.log(float(np.sum(np.exp(x - top))))


def _rn(tables: _RnTables, k: int, n: int, l: int, cfg: GeneralCriterionConfig, p: float, tail_cap: int) -> RnValue:
    m = cfg.m
    lw = tables.logW[k]
    a = int(math.floor(float(cfg.alpha(np.array([l]))[0]))) + 1
    b = m ** (n + 1) - l - 1
    first = float(np.sum(np.exp(-p * lw[a: b + 1]))) if b >= a else 0.0
    j0 = m ** (n + 1)
    js = np.arange(j0, tail_cap + 1)
    lt = p * (lw[js] - lw[js - l] - tables.log_inf[js])
    log_second = _lse(lt)
    D = max(10, (tail_cap - j0) // 10)
    D = min(D, len(lt) - 1)
    inconclusive = False
    if D < 1:
        log_rem, inconclusive = math.inf, True
    else:
        d = lt[-1] - lt[-1 - D]
        logr = d / D
        if logr >= 0:
            log_rem, inconclusive = math.inf, True
        else:
            log_geo = lt[-1] + logr - math.log(-math.expm1(logr))
            s = -d / math.log(tail_cap / (tail_cap - D))
            log_pow = lt[-1] + math.log(tail_cap) - math.log(s - 1) if s > 1 else math.inf
            if s <= 1:
                inconclusive = True
            log_rem = max(log_geo, log_pow)
    log_first = math.log(first) if first > 0 else -math.inf
    return RnValue(float(np.logaddexp(log_first, log_second)), first, log_second, log_rem, inconclusive)


def rn_kl(families: Sequence[WeightFamily], k: int, n: int, l: int, config: GeneralCriterionConfig,
          space: SpaceConfig, tail_cap: Optional[int] = None) -> RnValue:
    """R_n(k, l); k is 1-based.  The second sum runs to ``tail_cap`` (default 2 m^(n+1))."""
    m, g = config.m, config.gamma
    if not m**n <= l <= g * m**n:
        raise CriterionError(f"l={l} outside [m^n, gamma m^n] = [{m**n}, {g * m**n}]")
    if not 1 <= k <= len(families):
        raise CriterionError("family index out of range")
    cap = 2 * m ** (n + 1) if tail_cap is None else int(tail_cap)
    if cap < m ** (n + 1) + 1:
        raise CriterionError("tail_cap must exceed m^(n+1)")
    return _rn(_RnTables(families, cap), k - 1, n, l, config, space.p, cap)


def fit_decay_constant(family: WeightFamily, p: float, tau: float, probe: int = 100_000) -> float:
    """Smallest C with |W_n|^-p <= C n^-1 (log(n+1))^-(1+p/2+tau) on [1, probe]."""
    n = np.arange(1, probe + 1, dtype=np.float64)
    lhs = -p * family.log_abs_W(n.astype(np.int64))
    rhs = -np.log(n) - (1 + p / 2 + tau) * np.log(np.log1p(n))
    return float(np.exp((lhs - rhs).max()))


def _decay_hypothesis(families, cfg, p, probe):
    rows = []
    for k, fam in enumerate(families):
        if cfg.decay is not None:
            C, tau = cfg.decay[k]
            n = np.arange(1, probe + 1, dtype=np.float64)
            lhs = -p * fam.log_abs_W(n.astype(np.int64))
            rhs = math.log(C) - np.log(n) - (1 + p / 2 + tau) * np.log(np.log1p(n))
            bad = np.nonzero(lhs > rhs + 1e-12)[0]
            if bad.size:
                raise CriterionError(f"decay hypothesis fails for family {k + 1} at n={int(bad[0]) + 1}")
            rows.append({"family": k + 1, "C": C, "tau": tau, "source": "supplied"})
        else:
            tau = cfg.tau_default
            C = fit_decay_constant(fam, p, tau, probe)
            half = fit_decay_constant(fam, p, tau, probe // 2)
            rows.append({"family": k + 1, "C": C, "tau": tau, "source": "fitted",
                         "fit_stable": bool(C <= half * (1 + 1e-9))})
    return rows


def _l_grid(m, g, n, samples):
    lo, hi = m**n, g * m**n
    if n <= 3:
        return np.arange(lo, hi + 1)
    grid = np.unique(np.round(np.geomspace(lo, hi, samples)).astype(np.int64))
    return np.unique(np.concatenate([[lo, hi], grid]))


def _series_over_n(log_T: list, ns: list, min_slope: float = 1.05) -> SeriesVerdict:
    """Verdict on sum_n T_n from its trace over n = 1..n_max.

    The doubling rule cannot be met by a series indexed by block number n when
    m^n exhausts memory after a dozen terms, so the convergence call is made on
    the tail shape: every local log-log slope over the second half of the trace
    must exceed ``min_slope``.  The extrapolated tail uses the smallest slope.
    """
    T = np.array(log_T)
    if np.any(~np.isfinite(T)) or np.any(T > 700):
        bad = [n for n, t in zip(ns, T) if not (np.isfinite(t) and t <= 700)]
        return SeriesVerdict("diverges_witness", witness={
            "kind": "terms", "window": [bad[0], ns[-1]], "log_lower_bound": 700.0,
            "note": "sup_l R_n overflows"})
    last = T[-3:]
    if len(T) >= 3 and np.all(np.diff(last) >= 0):
        return SeriesVerdict("diverges_witness", witness={
            "kind": "terms", "window": [ns[-3], ns[-1]], "log_lower_bound": float(last.min()),
            "lower_bound": float(np.exp(last.min()))})
    start = max(1, len(T) // 2)
    tail_n = np.array(ns[start - 1:], dtype=np.float64)
    tail_T = T[start - 1:]
    if len(tail_T) < 2:
        return SeriesVerdict("inconclusive", evidence={"reason": "trace too short"})
    slopes = (tail_T[:-1] - tail_T[1:]) / np.log(tail_n[1:] / tail_n[:-1])
    S = float(np.exp(T).sum())
    doubling = _doubling_met(np.exp(T))
    ev = {"rule": "tail slope", "min_slope": float(slopes.min()), "slopes": slopes.tolist(),
          "doubling_rule_met": doubling, "partial_sum": S}
    if slopes.min() > min_slope:
        s = float(slopes.min())
        tail = float(np.exp(T[-1])) * ns[-1] / (s - 1.0)
        ev["extrapolated_tail"] = tail
        return SeriesVerdict("converges_numeric", value=S + tail, evidence=ev)
    return SeriesVerdict("inconclusive", evidence=ev)


def _doubling_met(terms: np.ndarray, rel: float = 1e-10) -> bool:
    S = np.cumsum(terms)
    hits, N = 0, 1
    while 2 * N <= len(S):
        if abs(S[2 * N - 1] - S[N - 1]) <= rel * S[2 * N - 1]:
            hits += 1
            if hits >= 2:
                return True
        else:
            hits = 0
        N *= 2
    return False


def check_general(families: Sequence[WeightFamily], config: GeneralCriterionConfig, space: SpaceConfig,
                  n_max: Optional[int] = None, l_samples: int = 32, probe: int = 100_000,
                  max_index: int = 1 << 22) -> Verdict:
    p = space.p
    m, g = config.m, config.gamma
    params = {"families": [_fam(f) for f in families], "m": m, "gamma": g, "alpha": config.alpha.describe(),
              "eps_tilde": config.eps_tilde, "p": p, "l_samples": l_samples}
    try:
        av = alpha_condition_check(config.alpha, config.eps_tilde, 10**5)
    except ValueError as e:
        return Verdict("general", "rejected", {"stage": "alpha", "reason": str(e)}, params)
    if not av.passed:
        return Verdict("general", "rejected", {"stage": "alpha", "reason": av.reason, "ratios": av.ratios}, params)
    decay = _decay_hypothesis(families, config, p, probe)
    if n_max is None:
        n_max = 1
        while 2 * m ** (n_max + 2) <= max_index:
            n_max += 1
    params["n_max"] = n_max
    cap_top = 2 * m ** (n_max + 1)
    tables = _RnTables(families, cap_top)
    per = []
    overall = []
    for k in range(len(families)):
        trace, logs = [], []
        for n in range(1, n_max + 1):
            best, arg, inc = -math.inf, None, False
            for l in _l_grid(m, g, n, l_samples):
                r = _rn(tables, k, n, int(l), config, p, 2 * m ** (n + 1))
                tot = r.log_total
                if tot > best:
                    best, arg = tot, int(l)
                inc = inc or r.inconclusive
            logs.append(best)
            trace.append({"n": n, "log_sup": best, "argmax_l": arg, "tail_inconclusive": inc})
        v = _series_over_n(logs, list(range(1, n_max + 1)))
        per.append({"family": k + 1, "verdict": v.to_json(), "trace": trace})
        overall.append(v)
    if any(v.status == "diverges_witness" for v in overall):
        status = "diverges_witness"
    elif all(v.converges for v in overall):
        status = "converges_numeric"
    else:
        status = "inconclusive"
    ev = {"alpha": av.to_json(), "decay_hypothesis": decay, "families": per}
    if status == "converges_numeric":
        ev["value"] = max(v.value for v in overall)
    return Verdict("general", status, ev, params)


# ---------------------------------------------------------------------------
# corollaries

def check_power_corollary(betas: Sequence[float], space: SpaceConfig, margin: float = 0.1) -> Verdict:
    a = float(min(betas))
    ok = a > 1.0 / space.p
    ev = {"a": a, "threshold": 1.0 / space.p}
    if ok:
        ev["sigma_threshold"] = 1.0 / (space.p * a - 1.0)
        ev["sigma_recommended"] = ev["sigma_threshold"] + margin
    return Verdict("power_corollary", "pass" if ok else "fail", ev, {"betas": list(betas), "p": space.p})


def check_geometric_corollary(lambdas: Sequence[float], space: SpaceConfig, gamma: int = 2) -> Verdict:
    a, b = float(min(lambdas)), float(max(lambdas))
    ev = {"a": a, "b": b}
    ok = a > 1
    if ok:
        x = max(2 * gamma + 1, gamma * math.log(b) / math.log(a) + 1)
        ev.update(gamma=gamma, m=int(math.ceil(x - 1e-12)))
    return Verdict("geometric_corollary", "pass" if ok else "fail", ev, {"lambdas": list(lambdas), "p": space.p})


def _inf_family_series(families, space) -> SeriesVerdict:
    kinds = {f.kind for f in families}
    if kinds == {"constant"}:
        return fhc_constant(WeightFamily.constant(min(f.value for f in families)), space)
    if kinds == {"power"}:
        return fhc_constant(WeightFamily.power(min(f.value for f in families)), space)
    return numeric_series(lambda j: -space.p * np.min(np.vstack([f.log_abs_W(j) for f in families]), axis=0))


def check_poly_common(polys: Sequence[PolynomialSpec], families: Sequence[WeightFamily], delta: float,
                      space: SpaceConfig, probe: int = 10_000) -> Verdict:
    if len(polys) != len(families):
        raise CriterionError("polys and families must be aligned")
    margins = [admissibility(P)[0] for P in polys]
    bounds = [bounded_check(f, probe) for f in families]
    C = max([1.0] + [b.limsup_estimate for b in bounds])
    series = _inf_family_series(families, space)
    n = np.arange(1, probe + 1)
    inf_pos = bool(np.all(np.isfinite(np.min(np.vstack([f.log_abs_W(n) for f in families]), axis=0))))
    M = max(sum(abs(c) * b.sup_estimate ** (i + 1) for i, c in enumerate(P.coeffs)) for P, b in zip(polys, bounds))
    margin_ok = [mg >= 1 + delta - 1e-12 for mg in margins]
    ok = all(margin_ok) and series.converges and inf_pos
    ev = {"margins": margins, "margin_pass": margin_ok, "rho_bound": 1.0 / (1.0 + delta),
          "rho_actual": max(1.0 / mg for mg in margins) if all(mg > 0 for mg in margins) else None,
          "C": C, "sup_weights": [b.sup_estimate for b in bounds], "M": M,
          "inf_series": series.to_json(), "inf_positive": inf_pos}
    if not all(margin_ok):
        ev["failing_polys"] = [i + 1 for i, good in enumerate(margin_ok) if not good]
    return Verdict("poly_common", "pass" if ok else "fail", ev,
                   {"polys": [P.describe() for P in polys], "families": [_fam(f) for f in families],
                    "delta": delta, "p": space.p})


def check_spectrum_corollary(family: WeightFamily, polys: Sequence[PolynomialSpec], a: float, b: float,
                             space: SpaceConfig, grid: int = 200, window=(1, 10_000)) -> Verdict:
    if grid < 10:
        raise CriterionError("grid must be >= 10")
    r_inv = 1.0 / point_spectrum_radius(family, space, window)
    lam1 = [abs(P.coeffs[0]) for P in polys]
    if not a > r_inv:
        raise CriterionError(f"a={a} must exceed 1/r_(p,w) = {r_inv:.6g}")
    if not a <= min(lam1):
        raise CriterionError("a must not exceed min |lambda_1|")
    rows = []
    for P, l1 in zip(polys, lam1):
        r = np.linspace(a, l1, grid, endpoint=False)
        g = l1 / r - sum(abs(c) / r ** (i + 2) for i, c in enumerate(P.coeffs[1:]))
        i = int(np.argmax(g))
        rows.append({"r": float(r[i]), "margin": float(g[i]), "in_b": l1 <= b})
    delta = min(row["margin"] for row in rows) - 1.0
    ok = delta > 0
    return Verdict("spectrum_corollary", "pass" if ok else "fail",
                   {"r_inv": r_inv, "witnesses": rows, "delta": delta,
                    "rho": 1.0 / (1.0 + delta) if ok else None},
                   {"family": _fam(family), "polys": [P.describe() for P in polys], "a": a, "b": b,
                    "p": space.p, "grid": grid})


# ---------------------------------------------------------------------------
# non-existence

@dataclass
class NonexistenceWitness:
    m_seq: list
    n_seq: list
    liminf_ratio: float
    limsup_ratio: float
    log_terms: list
    theta: Optional[float] = None
    base: Optional[int] = None
    start_l: int = 1

    def __post_init__(self):
        if len(self.m_seq) != len(self.n_seq):
            raise ValueError("sequences must have equal length")
        if any(b <= a for a, b in zip(self.m_seq, self.m_seq[1:])) or \
                any(b <= a for a, b in zip(self.n_seq, self.n_seq[1:])):
            raise ValueError("sequences must be strictly increasing")
        if self.m_seq and not (0 < self.liminf_ratio <= self.limsup_ratio < 1):
            raise ValueError("need 0 < liminf n/m <= limsup n/m < 1")

    def to_json(self) -> dict:
        return dict(self.__dict__)


@dataclass
class TermTrace:
    log_terms: list
    values: list  # None where exp would overflow


def nonexistence_terms(v: WeightFamily, w: WeightFamily, witness: NonexistenceWitness, space: SpaceConfig) -> TermTrace:
    """|W^w_m|^p / (|W^v_m|^p |W^w_{m-n}|^p) along the witness sequences."""
    if not witness.m_seq:
        return TermTrace([], [])
    m = np.array(witness.m_seq, dtype=np.int64)
    n = np.array(witness.n_seq, dtype=np.int64)
    lt = space.p * (w.log_abs_W(m) - v.log_abs_W(m) - w.log_abs_W(m - n))
    lt = [float(x) for x in np.atleast_1d(lt)]
    return TermTrace(lt, [math.exp(x) if x < 709 else None for x in lt])


def search_divergence_witness(v: WeightFamily, w: WeightFamily, space: SpaceConfig,
                              theta_grid=(0.5, 0.25, 0.75, 0.1, 0.9), base_grid=(2, 3, 4, 5, 10),
                              L: int = 30) -> Optional[NonexistenceWitness]:
    """First (theta, base) whose terms increase strictly to at least 1e6.

    The witness keeps the strictly increasing tail of the trace, which must
    cover at least half of the probed levels.
    """
    for theta in theta_grid:
        if not 0 < theta < 1:
            raise ValueError("theta must lie in (0, 1)")
        for base in base_grid:
            Lb = min(L, int(62 / math.log2(base)))
            ls = np.arange(1, Lb + 1)
            m = np.array([base**int(l) for l in ls], dtype=np.int64)
            n = np.floor(theta * m).astype(np.int64)
            ok = n >= 1
            if ok.sum() < 3:
                continue
            m, n, ls = m[ok], n[ok], ls[ok]
            keep = np.concatenate([[True], np.diff(n) > 0])
            m, n, ls = m[keep], n[keep], ls[keep]
            lt = space.p * (w.log_abs_W(m) - v.log_abs_W(m) - w.log_abs_W(m - n))
            start = len(lt) - 1
            while start > 0 and lt[start - 1] < lt[start]:
                start -= 1
            run = len(lt) - start
            if run >= max(3, len(lt) // 2) and lt[-1] >= LOG_1E6:
                r = n[start:] / m[start:]
                return NonexistenceWitness(
                    [int(x) for x in m[start:]], [int(x) for x in n[start:]],
                    float(r.min()), float(r.max()), [float(x) for x in lt[start:]],
                    theta, int(base), int(ls[start]))
    return None


def witness_verdict(v: WeightFamily, w: WeightFamily, space: SpaceConfig, **kw) -> Verdict:
    wit = search_divergence_witness(v, w, space, **kw)
    ev = {"witness": wit.to_json() if wit else None, "cross_check_flag": wit is not None}
    if wit:
        ev["note"] = "terms grow without bound: evidence that no vector is both FHC for B_v and HC for B_w"
    return Verdict("divergence_witness", "witness_found" if wit else "no_witness", ev,
                   {"v": _fam(v), "w": _fam(w), "p": space.p})
