"""Attribution of eigenvalue changes to node, distribution and edge factors."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import FD_MODES
from .errors import ConfigError
from .shock import TransmissionModel, assemble, largest_eigenvalue

FACTORS = ("node", "flow", "edge")


@dataclass(frozen=True)
class ContributionTriple:
    d_lambda: float
    node_contrib: float
    flow_contrib: float
    edge_contrib: float
    residual: float
    direction: str
    window_end: str | None = None

    def as_row(self) -> dict:
        return {
            "window_end": self.window_end,
            "d_lambda": self.d_lambda,
            "node_contrib": self.node_contrib,
            "flow_contrib": self.flow_contrib,
            "edge_contrib": self.edge_contrib,
            "residual": self.residual,
            "direction": self.direction,
        }


def direction_of(d_lambda: float) -> str:
    if d_lambda < 0:
        return "toward_stability"
    if d_lambda > 0:
        return "toward_instability"
    return "unchanged"


def spectral_radius(node, U, E, tol=1e-10, max_iter=10_000) -> float:
    return largest_eigenvalue(assemble(node, U, E), tol=tol, max_iter=max_iter)[0]


def contributions(
    prev: TransmissionModel,
    nxt: TransmissionModel,
    h_rel: float = 1e-6,
    mode: str = "substitution",
    tol: float = 1e-10,
    max_iter: int = 10_000,
    window_end: str | None = None,
) -> ContributionTriple:
    """Split ``lam(next) - lam(prev)`` into factor contributions.

    ``substitution`` swaps one factor at a time from ``prev`` to ``nxt`` and
    re-solves the eigenvalue. ``entrywise`` sums ``(k2 - k1) * df/dk`` over
    every changed entry, with central differences of step
    ``h_rel * max(|k|, 1)``. What the first-order terms miss is reported as
    the residual.
    """
    if prev.markets != nxt.markets:
        raise ValueError("models must share the same market set and order")
    if mode not in FD_MODES:
        raise ConfigError(f"fd_mode must be one of {FD_MODES}, got {mode!r}")
    if not h_rel > 0:
        raise ConfigError("h_rel must be positive")
    base = prev.lam
    d_lambda = nxt.lam - prev.lam
    if mode == "substitution":
        def f(node, U, E):
            return spectral_radius(node, U, E, tol, max_iter)

        node_c = 0.0 if np.array_equal(prev.node, nxt.node) else f(nxt.node, prev.U, prev.E) - base
        flow_c = 0.0 if np.array_equal(prev.U, nxt.U) else f(prev.node, nxt.U, prev.E) - base
        edge_c = 0.0 if np.array_equal(prev.E, nxt.E) else f(prev.node, prev.U, nxt.E) - base
    else:
        node_c, flow_c, edge_c = _entrywise(prev, nxt, h_rel, tol, max_iter)
    residual = d_lambda - (node_c + flow_c + edge_c)
    return ContributionTriple(
        d_lambda=float(d_lambda),
        node_contrib=float(node_c),
        flow_contrib=float(flow_c),
        edge_contrib=float(edge_c),
        residual=float(residual),
        direction=direction_of(d_lambda),
        window_end=window_end,
    )


def _entrywise(prev, nxt, h_rel, tol, max_iter):
    factors = [prev.node.copy(), prev.U.copy(), prev.E.copy()]
    targets = [nxt.node, nxt.U, nxt.E]
    out = []
    for k, (cur, tgt) in enumerate(zip(factors, targets)):
        total = 0.0
        delta = tgt - cur
        for idx in zip(*np.nonzero(delta)):
            x0 = cur[idx]
            h = h_rel * max(abs(x0), 1.0)
            vals = []
            for sgn in (1.0, -1.0):
                args = [a.copy() if j == k else a for j, a in enumerate(factors)]
                args[k][idx] = max(x0 + sgn * h, 0.0)
                vals.append(spectral_radius(*args, tol=tol, max_iter=max_iter))
            step = (x0 + h) - max(x0 - h, 0.0)
            total += delta[idx] * (vals[0] - vals[1]) / step
        out.append(total)
    return tuple(out)


@dataclass(frozen=True)
class ContributionSummary:
    """Histogram and association statistics by direction bucket."""

    counts: dict[str, int]
    histograms: dict[str, dict[str, tuple[np.ndarray, np.ndarray]]]
    correlations: dict[str, dict[str, float]]


def contribution_series(models, h_rel=1e-6, mode="substitution", tol=1e-10, max_iter=10_000, window_ends=None):
    """One triple per consecutive model pair."""
    models = list(models)
    if len(models) < 2:
        raise ValueError("need at least two models")
    ends = window_ends or [None] * len(models)
    return [
        contributions(a, b, h_rel=h_rel, mode=mode, tol=tol, max_iter=max_iter, window_end=ends[k + 1])
        for k, (a, b) in enumerate(zip(models, models[1:]))
    ]


def summarize(triples, bins: int = 20) -> ContributionSummary:
    """Per-direction histograms of each contribution and pairwise correlations."""
    buckets = {"all": list(triples)}
    for name in ("toward_stability", "toward_instability"):
        buckets[name] = [t for t in triples if t.direction == name]
    counts, hists, corrs = {}, {}, {}
    for name, items in buckets.items():
        counts[name] = len(items)
        arr = np.array([[t.node_contrib, t.flow_contrib, t.edge_contrib] for t in items]).reshape(-1, 3)
        hists[name] = {
            f: np.histogram(arr[:, k], bins=bins) if len(arr) else (np.zeros(0), np.zeros(0))
            for k, f in enumerate(FACTORS)
        }
        corrs[name] = {
            "node_flow": _corr(arr[:, 0], arr[:, 1]),
            "node_edge": _corr(arr[:, 0], arr[:, 2]),
            "flow_edge": _corr(arr[:, 1], arr[:, 2]),
        }
    return ContributionSummary(counts, hists, corrs)


def _corr(a, b) -> float:
    if len(a) < 2 or np.std(a) == 0 or np.std(b) == 0:
        return float("nan")
    return float(np.corrcoef(a, b)[0, 1])


CSV_COLUMNS = ("window_end", "d_lambda", "node_contrib", "flow_contrib", "edge_contrib", "residual", "direction")


def write_contributions_csv(triples, path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for t in triples:
            row = t.as_row()
            w.writerow([row["window_end"] or "", *(repr(float(row[c])) for c in CSV_COLUMNS[1:6]), row["direction"]])
