"""Command line: ``fhcvec {check,build,simulate,basis,report} CONFIG [--out DIR] [--force] [--seed-override N]``.

The config is one YAML document, validated strictly (unknown keys are errors).
Every file written carries the resolved config and a single ``generated_at``
line; strip that line and reruns compare byte for byte.

Exit codes: 0 ok, 1 a computation errored, 2 bad config, 3 refused (a
precondition failed and ``--force`` was not given).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Annotated, Literal, Optional, Union

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from . import criteria as C
from . import plotting
from .adapted_basis import build_adapted_basis, verify_basis
from .arith import AlphaFamily
from .core import SpaceConfig, SparseVec
from .randvec import (DistributionSpec, RandomVectorSpec, build_Z_common_poly, build_Z_common_weights,
                      build_Z_single)
from .shift_ops import PolynomialSpec, admissibility
from .simulate import CSV_HEADER, Experiment, ExperimentRejected, OperatorSpec, default_target_grid, \
    experiment_J_max, run_experiment
from .weights import WeightFamily, bounded_check, fhc_constant

EXIT_OK, EXIT_ERROR, EXIT_CONFIG, EXIT_REFUSED = 0, 1, 2, 3

Complexish = Union[float, tuple[float, float]]


class Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


def _cx(v) -> complex:
    return complex(v[0], v[1]) if isinstance(v, (list, tuple)) else complex(v)


# ---------------------------------------------------------------------------
# schema

class SpaceModel(Strict):
    p: float = 2.0

    @field_validator("p")
    @classmethod
    def _p(cls, v):
        if not v >= 1:
            raise ValueError("p must be >= 1")
        return v


class FamilyModel(Strict):
    name: str = ""
    kind: Literal["constant", "power", "ratio_power", "exp_log_power", "explicit"]
    value: Optional[float] = None
    p: Optional[float] = None  # ratio_power only
    weights: Optional[list[Complexish]] = None  # explicit only

    def build(self, p: float) -> WeightFamily:
        if self.kind == "explicit":
            if not self.weights:
                raise ValueError(f"family {self.name!r}: explicit weights missing")
            return WeightFamily.explicit([_cx(w) for w in self.weights])
        if self.value is None:
            raise ValueError(f"family {self.name!r}: value missing")
        if self.kind == "constant":
            return WeightFamily.constant(self.value)
        if self.kind == "power":
            return WeightFamily.power(self.value)
        if self.kind == "ratio_power":
            return WeightFamily.ratio_power(self.value, self.p if self.p is not None else p)
        return WeightFamily.exp_log_power(self.value)


class PolyModel(Strict):
    name: str
    coeffs: list[Complexish]


class OperatorModel(Strict):
    family: str
    poly: Optional[str] = None


class AlphaModel(Strict):
    kind: Literal["log_power", "plain_log", "linear"] = "log_power"
    sigma: float = 1.0

    def build(self) -> AlphaFamily:
        if self.kind == "linear":
            return AlphaFamily("custom", fn=lambda l: l)
        return AlphaFamily(self.kind, self.sigma)


class FhcCrit(Strict):
    criterion: Literal["fhc"]
    family: str


class BoundedCrit(Strict):
    criterion: Literal["bounded"]
    family: str
    probe: int = 10_000


class GeometricCrit(Strict):
    criterion: Literal["geometric"]
    families: list[str]
    omega: FamilyModel
    eta: float
    M: float
    C: float
    probe: tuple[int, int] = (200, 200)
    convention: Literal["literal", "shifted"] = "literal"


class GeneralCrit(Strict):
    criterion: Literal["general"]
    families: list[str]
    m: int
    gamma: int = 2
    alpha: AlphaModel = AlphaModel()
    eps_tilde: float = 0.5
    n_max: Optional[int] = None
    l_samples: int = 32
    decay: Optional[list[tuple[float, float]]] = None


class PowerCorCrit(Strict):
    criterion: Literal["power_corollary"]
    betas: list[float]


class GeometricCorCrit(Strict):
    criterion: Literal["geometric_corollary"]
    lambdas: list[float]
    gamma: int = 2


class PolyCommonCrit(Strict):
    criterion: Literal["poly_common"]
    operators: Optional[list[int]] = None
    delta: float
    probe: int = 10_000


class SpectrumCrit(Strict):
    criterion: Literal["spectrum"]
    family: str
    polys: list[str]
    a: float
    b: float
    grid: int = 200


class WitnessCrit(Strict):
    criterion: Literal["witness"]
    v: str
    w: str
    theta_grid: list[float] = [0.5, 0.25, 0.75, 0.1, 0.9]
    base_grid: list[int] = [2, 3, 4, 5, 10]
    L: int = 30


Criterion = Annotated[Union[FhcCrit, BoundedCrit, GeometricCrit, GeneralCrit, PowerCorCrit, GeometricCorCrit,
                            PolyCommonCrit, SpectrumCrit, WitnessCrit], Field(discriminator="criterion")]


class DistModel(Strict):
    kind: Literal["gaussian", "uniform_disk"] = "gaussian"
    radius: float = 1.0


class VectorModel(Strict):
    construction: Literal["single", "common_weights", "common_poly"] = "single"
    dist: DistModel = DistModel()
    master_seed: int = 0
    seed: int = 0
    J_max: Optional[int] = None
    m: Optional[int] = None
    gamma: int = 2


class GridModel(Strict):
    max_degree: int
    coeffs: list[Complexish]


class ExperimentModel(Strict):
    operators: Optional[list[int]] = None
    targets: Optional[list[dict[int, Complexish]]] = None
    target_grid: Optional[GridModel] = None
    epsilons: list[float] = [0.5]
    horizon: int = 10_000
    seeds: Union[int, list[int]] = 1
    workers: int = 1
    reach: Optional[int] = None
    coverage_range: Optional[tuple[int, int]] = None
    scan: Literal["full", "windows"] = "full"
    burn_in: Optional[int] = None


class BasisModel(Strict):
    operator: int = 0
    K: int = 60
    tol: float = 1e-9
    rho: Optional[float] = None


class OutputModel(Strict):
    dir: str = "out"
    plots: bool = True


class Config(Strict):
    space: SpaceModel = SpaceModel()
    families: list[FamilyModel] = []
    polynomials: list[PolyModel] = []
    operators: list[OperatorModel] = []
    criteria: list[Criterion] = []
    vector: Optional[VectorModel] = None
    experiment: Optional[ExperimentModel] = None
    basis: Optional[BasisModel] = None
    output: OutputModel = OutputModel()


class ConfigError(ValueError):
    pass


def load_config(path, seed_override: Optional[int] = None) -> Config:
    try:
        raw = yaml.safe_load(Path(path).read_text())
    except (OSError, yaml.YAMLError) as e:
        raise ConfigError(f"{path}: {e}") from e
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    try:
        cfg = Config.model_validate(raw)
    except ValidationError as e:
        lines = [f"{'.'.join(str(x) for x in err['loc'])}: {err['msg']}" for err in e.errors()]
        raise ConfigError("invalid config:\n  " + "\n  ".join(lines)) from e
    if seed_override is not None:
        if cfg.vector is None:
            cfg.vector = VectorModel()
        cfg.vector.master_seed = int(seed_override)
    return cfg


# ---------------------------------------------------------------------------
# resolved objects

class Resolved:
    """Config with names resolved to library objects."""

    def __init__(self, cfg: Config):
        self.cfg = cfg
        self.space = SpaceConfig(cfg.space.p)
        names = [f.name for f in cfg.families]
        if len(set(names)) != len(names):
            raise ConfigError("family names must be unique")
        try:
            self.families = {f.name: f.build(cfg.space.p) for f in cfg.families}
            self.polys = {q.name: PolynomialSpec([_cx(c) for c in q.coeffs]) for q in cfg.polynomials}
        except ValueError as e:
            raise ConfigError(str(e)) from e
        self.operators = []
        for i, o in enumerate(cfg.operators):
            if o.family not in self.families:
                raise ConfigError(f"operators.{i}.family: unknown family {o.family!r}")
            if o.poly is not None and o.poly not in self.polys:
                raise ConfigError(f"operators.{i}.poly: unknown polynomial {o.poly!r}")
            self.operators.append(OperatorSpec(self.families[o.family], self.polys.get(o.poly)))

    def family(self, name: str) -> WeightFamily:
        if name not in self.families:
            raise ConfigError(f"unknown family {name!r}")
        return self.families[name]

    def vector_spec(self) -> RandomVectorSpec:
        v = self.cfg.vector
        if v is None:
            raise ConfigError("vector section missing")
        return RandomVectorSpec(DistributionSpec(v.dist.kind, v.dist.radius), v.master_seed, v.J_max, v.m,
                                v.gamma, v.construction, v.seed)

    def experiment(self) -> Experiment:
        e = self.cfg.experiment
        if e is None:
            raise ConfigError("experiment section missing")
        ops = self.operators if e.operators is None else [self.operators[i] for i in e.operators]
        if e.targets is not None:
            targets = [SparseVec.from_dict({int(k): _cx(v) for k, v in t.items()}) for t in e.targets]
        elif e.target_grid is not None:
            targets = default_target_grid(self.space, e.target_grid.max_degree,
                                          [_cx(c) for c in e.target_grid.coeffs])
        else:
            targets = [SparseVec(), SparseVec.from_dict({0: 1})]
        seeds = list(range(e.seeds)) if isinstance(e.seeds, int) else list(e.seeds)
        return Experiment(ops, self.vector_spec(), targets, list(e.epsilons), e.horizon, seeds, self.space,
                          e.reach, e.coverage_range, e.scan, e.workers, e.burn_in)


# ---------------------------------------------------------------------------
# output helpers

def jsonable(x):
    if isinstance(x, dict):
        return {str(k): jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return jsonable(x.tolist())
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating, float)):
        x = float(x)
        if math.isnan(x):
            return None
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if isinstance(x, complex):
        return [jsonable(x.real), jsonable(x.imag)]
    return x


def _stamp() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


class Writer:
    def __init__(self, out: Path, cfg: Config):
        self.out = Path(out)
        self.config = jsonable(cfg.model_dump(mode="json"))
        self.written: list[Path] = []

    def _path(self, name):
        self.out.mkdir(parents=True, exist_ok=True)
        p = self.out / name
        self.written.append(p)
        return p

    def json(self, name, payload: dict) -> Path:
        body = {"generated_at": _stamp(), "config": self.config, **jsonable(payload)}
        p = self._path(name)
        p.write_text(json.dumps(body, indent=1, allow_nan=False) + "\n")
        return p

    def _header(self) -> str:
        return f"# generated_at: {_stamp()}\n# config: {json.dumps(self.config, separators=(',', ':'))}\n"

    def csv(self, name, header, rows) -> Path:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
        p = self._path(name)
        p.write_text(self._header() + buf.getvalue())
        return p

    def text(self, name, body: str) -> Path:
        p = self._path(name)
        p.write_text(self._header() + body)
        return p

    def figure(self, fn, name, *args, **kw) -> Path:
        return fn(*args, self._path(name), description=json.dumps(self.config, separators=(",", ":")), **kw)


# ---------------------------------------------------------------------------
# commands

def run_criterion(res: Resolved, c) -> dict:
    s = res.space
    kind = c.criterion
    if kind == "fhc":
        v = fhc_constant(res.family(c.family), s)
        return {"criterion": "fhc", "status": v.status, "evidence": v.to_json(), "parameters": {"family": c.family}}
    if kind == "bounded":
        b = bounded_check(res.family(c.family), c.probe)
        return {"criterion": "bounded", "status": "pass" if b.bounded else "fail", "evidence": b.__dict__,
                "parameters": {"family": c.family, "probe": c.probe}}
    if kind == "geometric":
        cfg = C.GeometricCriterionConfig(c.omega.build(s.p), c.eta, c.M, c.C)
        v = C.check_geometric([res.family(f) for f in c.families], cfg, s, c.probe, c.convention)
    elif kind == "general":
        decay = None if c.decay is None else tuple(tuple(d) for d in c.decay)
        cfg = C.GeneralCriterionConfig(c.m, c.gamma, c.alpha.build(), decay, c.eps_tilde)
        v = C.check_general([res.family(f) for f in c.families], cfg, s, c.n_max, c.l_samples)
    elif kind == "power_corollary":
        v = C.check_power_corollary(c.betas, s)
    elif kind == "geometric_corollary":
        v = C.check_geometric_corollary(c.lambdas, s, c.gamma)
    elif kind == "poly_common":
        idx = range(len(res.operators)) if c.operators is None else c.operators
        ops = [res.operators[i] for i in idx]
        if any(o.poly is None for o in ops):
            raise ConfigError("poly_common needs operators with polynomials")
        v = C.check_poly_common([o.poly for o in ops], [o.family for o in ops], c.delta, s, c.probe)
    elif kind == "spectrum":
        v = C.check_spectrum_corollary(res.family(c.family), [res.polys[q] for q in c.polys], c.a, c.b, s, c.grid)
    else:
        v = C.witness_verdict(res.family(c.v), res.family(c.w), s, theta_grid=c.theta_grid,
                              base_grid=c.base_grid, L=c.L)
    return v.to_json()


def _run_criteria(res: Resolved):
    out, errored = [], False
    for i, c in enumerate(res.cfg.criteria):
        try:
            out.append(run_criterion(res, c))
        except (ValueError, ArithmeticError, IndexError) as e:
            errored = True
            out.append({"criterion": c.criterion, "status": "error", "evidence": {"error": str(e)},
                        "parameters": {"index": i}})
    return out, errored


_PASSING = {"pass", "converges_analytic", "converges_numeric", "no_witness"}


def cmd_check(res: Resolved, w: Writer, args) -> int:
    verdicts, errored = _run_criteria(res)
    w.json("checks.json", {"verdicts": verdicts})
    if res.cfg.output.plots:
        for i, v in enumerate(verdicts):
            if v["criterion"] == "general" and v["status"] != "error" and "families" in v["evidence"]:
                w.figure(plotting.general_traces, f"check_{i}_general.png", v)
            if v["criterion"] == "divergence_witness" and v["evidence"].get("witness"):
                wit = v["evidence"]["witness"]
                w.figure(plotting.term_trace, f"check_{i}_witness.png", wit["log_terms"])
    for v in verdicts:
        print(f"{v['criterion']:>22}: {v['status']}")
    return EXIT_ERROR if errored else EXIT_OK


def cmd_build(res: Resolved, w: Writer, args) -> int:
    spec = res.vector_spec()
    s = res.space
    verdicts, errored = _run_criteria(res)
    failed = errored or any(v["status"] not in _PASSING for v in verdicts)
    if failed and not args.force:
        print("criteria did not all pass; rerun with --force to build anyway", file=sys.stderr)
        return EXIT_REFUSED
    if spec.J_max is None:
        if res.cfg.experiment is None:
            raise ConfigError("vector.J_max missing and no experiment to derive it from")
        spec = replace(spec, J_max=experiment_J_max(res.experiment()))
    ops = res.operators
    if spec.construction == "single":
        if len(ops) != 1:
            raise ConfigError("single construction needs exactly one operator")
        built = build_Z_single(ops[0].family, spec, s)
    elif spec.construction == "common_weights":
        built = build_Z_common_weights([o.family for o in ops], spec, s)
    else:
        if spec.J_max > 4000:
            raise ConfigError("materialising a common_poly vector needs J_max <= 4000; simulate works lazily")
        bases = [build_adapted_basis(o.poly, o.family, spec.J_max, s) for o in ops]
        built = build_Z_common_poly(bases, spec, s)
    tail = built.tail.bound_expectation
    e = res.cfg.experiment
    if e is not None and tail > min(e.epsilons) / 4 and not args.force:
        print(f"tail bound {tail:.3g} exceeds min eps/4; raise J_max or use --force", file=sys.stderr)
        return EXIT_REFUSED
    w.text("vector.txt", built.vector.dumps())
    w.json("vector.json", {
        "spec": spec.describe(), "tail_bound": built.tail.to_json(), "m": spec.m, "gamma": spec.gamma,
        "J_max": spec.J_max, "block_table": built.block_table, "warnings": built.warnings,
        "criteria": "failed" if failed else "passed", "verdicts": verdicts})
    print(f"wrote {len(built.vector)} coefficients, tail bound {tail:.3g}")
    return EXIT_OK


def cmd_simulate(res: Resolved, w: Writer, args) -> int:
    exp = res.experiment()
    recs = run_experiment(exp)
    w.csv("results.csv", CSV_HEADER, [r.csv_row() for r in recs])
    w.json("results.json", {"experiment": exp.describe(), "J_max": experiment_J_max(exp),
                            "records": [r.to_json() for r in recs]})
    rows = []
    for i, r in enumerate(recs):
        if r.density is not None and r.density.trace is not None:
            rows += [[i, int(a), int(b), repr(float(c))] for a, b, c in r.density.trace]
    w.csv("density_traces.csv", ["record", "n", "count", "ratio"], rows)
    if res.cfg.output.plots:
        w.figure(plotting.density_traces, "density.png", recs)
        if any(r.window_coverage is not None for r in recs):
            w.figure(plotting.coverage_bars, "coverage.png", recs)
    print(f"{len(recs)} records")
    return EXIT_OK


def cmd_basis(res: Resolved, w: Writer, args) -> int:
    b = res.cfg.basis or BasisModel()
    if not 0 <= b.operator < len(res.operators) or res.operators[b.operator].poly is None:
        raise ConfigError("basis.operator must index an operator with a polynomial")
    op = res.operators[b.operator]
    margin, ok = admissibility(op.poly)
    if not ok:
        print(f"polynomial is not admissible: margin {margin:.6g} <= 0", file=sys.stderr)
        return EXIT_REFUSED
    basis = build_adapted_basis(op.poly, op.family, b.K, res.space)
    rep = verify_basis(basis, b.tol, rho=b.rho)
    w.csv("basis.csv", ["k", "l", "beta_log_abs", "beta_phase"],
          [[k, l, repr(float(la)), repr(float(ph))] for k, l, la, ph in basis.rows()])
    w.json("basis_verification.json", {"margin": margin, "rho": basis.rho, "cw": basis.cw, **rep.to_json()})
    if res.cfg.output.plots:
        w.figure(plotting.basis_norms, "basis_norms.png", basis)
    print(f"K={b.K}: {'all rows pass' if rep.passed else 'verification failed'}")
    return EXIT_OK


def cmd_report(res: Resolved, w: Writer, args) -> int:
    out = Path(args.out or res.cfg.output.dir)
    parts = {}
    for name in ("checks.json", "vector.json", "results.json", "basis_verification.json"):
        p = out / name
        if p.exists():
            d = json.loads(p.read_text())
            d.pop("generated_at", None)
            d.pop("config", None)
            parts[name] = d
    summary = {}
    if "checks.json" in parts:
        summary["verdicts"] = {f"{i}:{v['criterion']}": v["status"] for i, v in enumerate(parts["checks.json"]["verdicts"])}
    if "results.json" in parts:
        recs = parts["results.json"]["records"]
        cov, fin = {}, {}
        for r in recs:
            key = f"op{r['operator']}/t{r['target']}/eps{r['eps']}"
            if r["window_coverage"] is not None:
                cov.setdefault(key, []).append(r["window_coverage"])
            if r["density"] is not None:
                fin.setdefault(key, []).append(r["density"]["final_ratio"])
        summary["mean_coverage"] = {k: float(np.mean(v)) for k, v in cov.items()}
        summary["min_final_ratio"] = {k: float(np.min(v)) for k, v in fin.items()}
    if "basis_verification.json" in parts:
        summary["basis_passed"] = parts["basis_verification.json"]["passed"]
    if "vector.json" in parts:
        summary["vector_tail_bound"] = parts["vector.json"]["tail_bound"]["bound_expectation"]
    w.json("summary.json", {"summary": summary, "sources": sorted(parts)})
    print(json.dumps(summary, indent=1))
    return EXIT_OK


COMMANDS = {"check": cmd_check, "build": cmd_build, "simulate": cmd_simulate, "basis": cmd_basis,
            "report": cmd_report}


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="fhcvec", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("config")
    ap.add_argument("--out", default=None, help="output directory (overrides output.dir)")
    ap.add_argument("--force", action="store_true")
    ap.add_argument("--seed-override", type=int, default=None)
    args = ap.parse_args(argv)
    try:
        cfg = load_config(args.config, args.seed_override)
        res = Resolved(cfg)
    except ConfigError as e:
        print(e, file=sys.stderr)
        return EXIT_CONFIG
    w = Writer(Path(args.out or cfg.output.dir), cfg)
    try:
        return COMMANDS[args.command](res, w, args)
    except ConfigError as e:
        print(e, file=sys.stderr)
        return EXIT_CONFIG
    except ExperimentRejected as e:
        print(e, file=sys.stderr)
        return EXIT_REFUSED
    except (ValueError, ArithmeticError, IndexError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
