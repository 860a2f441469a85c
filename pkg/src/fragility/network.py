"""Conditional co-jump probabilities, masses, distances and gravity flows."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError

DEFAULT_EXPONENTS = (1.0, 1.0, 2.0)


@dataclass(frozen=True)
class FlowNetwork:
    """Everything derived from one window of jump indicators.

    ``P[i, j]`` is the probability that market ``i`` jumps given that ``j``
    jumps; ``G[i, j]`` is the flow from ``i`` to ``j``.
    """

    markets: tuple[str, ...]
    P: np.ndarray
    M: np.ndarray
    m: np.ndarray
    Q: np.ndarray
    G: np.ndarray
    window: tuple[str, str] | None = None
    exponents: tuple[float, float, float] = DEFAULT_EXPONENTS

    @property
    def n(self) -> int:
        return len(self.markets)

    @property
    def is_empty(self) -> bool:
        return not self.P.any()


def conditional_probability(jumps) -> np.ndarray:
    """``p[i, j] = sum_t I[t, i] I[t, j] / sum_t I[t, j]``.

    A market that never jumps in the window gets an all-zero column.
    """
    I = np.asarray(jumps)
    if I.ndim != 2 or I.shape[0] < 1:
        raise ValueError("jump window must be a non-empty 2-D array")
    I = I.astype(np.int64)
    co = I.T @ I
    counts = np.diag(co).astype(float)
    P = np.zeros(co.shape, dtype=float)
    nz = counts > 0
    P[:, nz] = co[:, nz] / counts[nz]
    return P


def masses(P) -> tuple[np.ndarray, np.ndarray]:
    """Sending mass (column sums) and receiving mass (row sums), diagonal included."""
    P = np.asarray(P, dtype=float)
    return P.sum(axis=0), P.sum(axis=1)


def flows(P, M, m, exponents=DEFAULT_EXPONENTS) -> tuple[np.ndarray, np.ndarray]:
    """Distances ``q = 1/p`` and flows ``g = M_i^a m_j^b / q^c``.

    Zero probability means infinite distance and zero flow.
    """
    alpha, beta, gamma = _check_exponents(exponents)
    P = np.asarray(P, dtype=float)
    M = np.asarray(M, dtype=float)
    m = np.asarray(m, dtype=float)
    pos = P > 0
    Q = np.full(P.shape, np.inf)
    G = np.zeros(P.shape)
    num = np.outer(M ** alpha, m ** beta)
    # subnormal probabilities overflow q to inf, which correctly drives g to 0
    with np.errstate(over="ignore"):
        Q[pos] = 1.0 / P[pos]
        G[pos] = num[pos] / Q[pos] ** gamma
    return Q, G


def _check_exponents(exponents) -> tuple[float, float, float]:
    try:
        alpha, beta, gamma = (float(x) for x in exponents)
    except (TypeError, ValueError):
        raise ConfigError(f"exponents must be three numbers, got {exponents!r}") from None
    if min(alpha, beta, gamma) < 0:
        raise ConfigError(f"exponents must be non-negative, got {(alpha, beta, gamma)}")
    return alpha, beta, gamma


def node_flows(G) -> tuple[np.ndarray, np.ndarray]:
    """Per-node (inflow, outflow) with self-flows excluded."""
    G = np.asarray(G, dtype=float)
    diag = np.diag(G)
    return G.sum(axis=0) - diag, G.sum(axis=1) - diag


def total_flow(G, double: bool = False) -> tuple[float, np.ndarray, np.ndarray]:
    """Sum of directed off-diagonal flows, plus per-node inflow and outflow.

    With ``double=True`` every edge is counted once as inflow and once as
    outflow, i.e. the total is doubled.
    """
    G = np.asarray(G, dtype=float)
    inflow, outflow = node_flows(G)
    off = G.copy()
    np.fill_diagonal(off, 0.0)
    total = float(off.sum())
    if double:
        total *= 2.0
    return total, inflow, outflow


def build_network(jumps, markets, exponents=DEFAULT_EXPONENTS, window=None) -> FlowNetwork:
    P = conditional_probability(jumps)
    M, m = masses(P)
    Q, G = flows(P, M, m, exponents)
    return FlowNetwork(
        markets=tuple(markets),
        P=P,
        M=M,
        m=m,
        Q=Q,
        G=G,
        window=window,
        exponents=tuple(float(x) for x in exponents),
    )


def write_matrix_csv(path, markets, A) -> None:
    """Square matrix with a market-id header row and first column; inf as ``inf``."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["market", *markets])
        for name, row in zip(markets, np.asarray(A, dtype=float)):
            w.writerow([name, *(_fmt(x) for x in row)])


def read_matrix_csv(path) -> tuple[tuple[str, ...], np.ndarray]:
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    markets = tuple(rows[0][1:])
    A = np.array([[float(x) for x in r[1:]] for r in rows[1:]], dtype=float)
    return markets, A


def write_snapshot(net: FlowNetwork, out_dir, prefix: str = "") -> dict[str, Path]:
    """P, Q, G matrices and the node summary (market, inflow, outflow, masses)."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {}
    for name, A in (("P", net.P), ("Q", net.Q), ("G", net.G)):
        p = out_dir / f"{prefix}{name}.csv"
        write_matrix_csv(p, net.markets, A)
        paths[name] = p
    _, inflow, outflow = total_flow(net.G)
    p = out_dir / f"{prefix}nodes.csv"
    with p.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["market", "inflow", "outflow", "sending_mass", "receiving_mass"])
        for k, name in enumerate(net.markets):
            w.writerow([name, _fmt(inflow[k]), _fmt(outflow[k]), _fmt(net.M[k]), _fmt(net.m[k])])
    paths["nodes"] = p
    return paths


def _fmt(x) -> str:
    return repr(float(x))
