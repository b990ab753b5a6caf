"""Report figures.  Agg backend, PNG output with fixed metadata so reruns match."""

from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "lines.linewidth": 1.4,
    "font.size": 9.0,
    "axes.linewidth": 0.8,
    "axes.labelsize": "medium",
    "axes.titlesize": "medium",
    "xtick.direction": "in",
    "ytick.direction": "in",
    "xtick.top": True,
    "ytick.right": True,
    "legend.fontsize": "small",
    "legend.frameon": False,
    "figure.figsize": [6.0, 3.8],
    "figure.dpi": 100,
    "savefig.bbox": "tight",
    "savefig.pad_inches": 0.05,
    "svg.hashsalt": "fhcvec",
}

_META = {"Software": None}


def _save(fig, path, description=None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    meta = dict(_META)
    if description:
        meta["Description"] = description
    fig.savefig(path, format="png", metadata=meta)
    plt.close(fig)
    return path


def density_traces(records, path, labels=None, description=None):
    """Running hit ratio #(hits <= n)/n against n, one line per record."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        drawn = 0
        for r in records:
            d = r.density
            if d is None or d.trace is None:
                continue
            tr = np.asarray(d.trace)
            ok = tr[:, 2] > 0
            if not ok.any():
                continue
            lab = None if labels is None else labels(r)
            ax.loglog(tr[ok, 0], tr[ok, 2], alpha=0.6, label=lab)
            drawn += 1
        ax.set_xlabel("n")
        ax.set_ylabel("hits up to n / n")
        if labels is not None and drawn:
            ax.legend()
        if not drawn:
            ax.text(0.5, 0.5, "no hits recorded", ha="center", transform=ax.transAxes)
        return _save(fig, path, description)


def coverage_bars(records, path, op_labels=None, description=None):
    """Mean window coverage per (operator, target, eps), with the 0.75 reference line."""
    groups = {}
    for r in records:
        if r.window_coverage is not None:
            groups.setdefault((r.operator, r.target, r.eps), []).append(r.window_coverage)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        keys = sorted(groups)
        x = np.arange(len(keys))
        means = [float(np.mean(groups[k])) for k in keys]
        ax.bar(x, means, color="0.55", width=0.6)
        ax.axhline(0.75, color="k", ls="--", lw=0.8)
        ax.set_xticks(x)
        names = [f"op{k[0]} t{k[1]} e{k[2]:g}" if op_labels is None else op_labels(k) for k in keys]
        ax.set_xticklabels(names, rotation=30, ha="right")
        ax.set_ylim(0, 1.05)
        ax.set_ylabel("mean window coverage")
        return _save(fig, path, description)


def basis_norms(basis, path, description=None):
    """log ||u_k||_p next to log(C_w rho^k)."""
    k = np.arange(basis.K + 1)
    ln = np.array([basis.log_norm(int(i)) for i in k])
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.plot(k, ln / math.log(10), "o", ms=2.5, label="log10 ||u_k||")
        ax.plot(k, (math.log(basis.cw) + k * math.log(basis.rho)) / math.log(10), "k-", lw=0.8,
                label="log10 C rho^k")
        ax.set_xlabel("k")
        ax.legend()
        return _save(fig, path, description)


def term_trace(log_terms, path, xs=None, xlabel="l", ylabel="log term", description=None):
    y = np.asarray(log_terms, dtype=float)
    x = np.arange(1, y.size + 1) if xs is None else np.asarray(xs)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.plot(x, y, "o-", ms=3)
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        return _save(fig, path, description)


def general_traces(verdict_json: dict, path, description=None):
    """Per-family log sup_l R_n(k, l) against n."""
    fams = verdict_json.get("evidence", {}).get("families", [])
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for f in fams:
            tr = f["trace"]
            ax.plot([t["n"] for t in tr], [t["log_sup"] for t in tr], "o-", ms=3, label=f"family {f['family']}")
        ax.set_xlabel("n")
        ax.set_ylabel("log sup_l R_n")
        if fams:
            ax.legend()
        return _save(fig, path, description)
