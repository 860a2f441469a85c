"""Shock-transmission matrix and its Perron root.

One step of the shock recursion scales the shock sitting at each market by
that market's inflow/outflow ratio, splits it across peers in proportion to
its flows to them, and rescales every transfer by an edge factor before it
lands.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .config import U_DENOMINATORS, W_KINDS
from .errors import ConfigError, NumericalError
from .network import FlowNetwork, node_flows

logger = logging.getLogger(__name__)

DENSE_FALLBACK_MAX_N = 64
EXPLOSIVE_NORM = 1e300


@dataclass(frozen=True)
class TransmissionModel:
    """Factors of one window and the assembled transmission matrix.

    ``node`` holds the diagonal of the node-scaling matrix. ``E`` is stored
    transposed relative to the edge factors, ``E[i, j] = a^E_{j,i}``, so that
    ``T = E * (U.T @ diag(node))`` elementwise.
    """

    markets: tuple[str, ...]
    node: np.ndarray
    U: np.ndarray
    E: np.ndarray
    T: np.ndarray
    lam: float
    eigvec: np.ndarray
    w_kind: str = "probability"
    u_denominator: str = "inflow"
    empty: bool = False

    @property
    def N(self) -> np.ndarray:
        return np.diag(self.node)

    def classification(self) -> dict[str, int]:
        labels = classify(self.node)
        return {k: int((labels == k).sum()) for k in ("amplifier", "absorber", "neutral")}

    def to_dict(self, matrices: bool = False) -> dict:
        out = {
            "markets": list(self.markets),
            "lambda": float(self.lam),
            "stable": bool(self.lam < 1.0),
            "empty_window": bool(self.empty),
            "w_kind": self.w_kind,
            "u_denominator": self.u_denominator,
            "classification": self.classification(),
            "node_factors": [float(x) for x in self.node],
            "eigvec": [float(x) for x in self.eigvec],
        }
        if matrices:
            out["U"] = self.U.tolist()
            out["E"] = self.E.tolist()
            out["T"] = self.T.tolist()
        return out


def node_factors(G) -> np.ndarray:
    """Inflow/outflow ratio per market, self-flows excluded.

    A market without outflow gets factor 0, so shocks reaching it die there.
    """
    inflow, outflow = node_flows(G)
    a = np.zeros_like(inflow)
    pos = outflow > 0
    a[pos] = inflow[pos] / outflow[pos]
    stranded = (~pos) & (inflow > 0)
    if stranded.any():
        logger.warning("%d market(s) with inflow but no outflow; node factor set to 0", int(stranded.sum()))
    return a


def classify(node) -> np.ndarray:
    node = np.asarray(node, dtype=float)
    return np.where(node > 1.0, "amplifier", np.where(node < 1.0, "absorber", "neutral"))


def distribution_matrix(G, denominator: str = "outflow") -> np.ndarray:
    """Share of market i's shock passed to j, ``g_ij / sum_{k != i} g_ik``.

    ``denominator="inflow"`` divides by market i's inflow instead; rows then
    no longer sum to one.
    """
    if denominator not in U_DENOMINATORS:
        raise ConfigError(f"u_denominator must be one of {U_DENOMINATORS}, got {denominator!r}")
    G = np.asarray(G, dtype=float)
    off = G.copy()
    np.fill_diagonal(off, 0.0)
    inflow, outflow = node_flows(G)
    denom = outflow if denominator == "outflow" else inflow
    U = np.zeros_like(off)
    pos = denom > 0
    U[pos] = off[pos] / denom[pos, None]
    return U


def edge_weights(w_kind: str, G, P=None, Q=None) -> np.ndarray:
    if w_kind not in W_KINDS:
        raise ConfigError(f"w_kind must be one of {W_KINDS}, got {w_kind!r}")
    if w_kind == "flow":
        return np.asarray(G, dtype=float)
    if w_kind == "probability":
        if P is None:
            raise ConfigError("w_kind='probability' needs the probability matrix")
        return np.asarray(P, dtype=float)
    if Q is None:
        if P is None:
            raise ConfigError("w_kind='inverse_distance' needs distances or probabilities")
        P = np.asarray(P, dtype=float)
        Q = np.full(P.shape, np.inf)
        Q[P > 0] = 1.0 / P[P > 0]
    return 1.0 / np.asarray(Q, dtype=float)


def edge_factor_matrix(G, W) -> np.ndarray:
    """``a^E[i, j] = (win_j / wout_i) * (gout_i / gin_j)`` in edge orientation.

    Sums skip self-terms. Entries with a zero denominator are 0. The product
    is formed as one numerator over one denominator so that ``W = G`` gives
    exactly 1.
    """
    gin, gout = node_flows(G)
    win, wout = node_flows(W)
    num = np.outer(gout, win)
    den = np.outer(wout, gin)
    A = np.zeros_like(num)
    pos = den > 0
    A[pos] = num[pos] / den[pos]
    return A


def edge_factors(G, w_kind: str = "probability", P=None, Q=None) -> np.ndarray:
    """Edge-scaling matrix ``E`` in transmission orientation (transposed)."""
    W = edge_weights(w_kind, G, P=P, Q=Q)
    return edge_factor_matrix(G, W).T.copy()


def assemble(node, U, E) -> np.ndarray:
    """``T = E * (U.T @ N)``; ``node`` may be the diagonal or the full matrix."""
    node = np.asarray(node, dtype=float)
    if node.ndim == 2:
        node = np.diag(node)
    U = np.asarray(U, dtype=float)
    E = np.asarray(E, dtype=float)
    n = node.shape[0]
    if U.shape != (n, n) or E.shape != (n, n):
        raise ValueError(f"shape mismatch: node {node.shape}, U {U.shape}, E {E.shape}")
    return E * (U.T * node[None, :])


def power_iteration(T, tol: float = 1e-10, max_iter: int = 10_000):
    """Dominant eigenpair of a nonnegative matrix.

    Iterates on ``T + s I`` with ``s`` the mean column sum of T. The shift
    leaves the Perron vector alone but makes it the only eigenvalue of
    maximal modulus, so periodic matrices converge too; because ``s`` scales
    with ``T`` the iterates are unchanged when ``T`` is multiplied by a
    positive constant. The estimate is the 1-norm growth of a unit 1-norm
    iterate.

    While the iterate is positive, ``min_i (Tx)_i / x_i <= lambda <=
    max_i (Tx)_i / x_i`` brackets the root and the run stops once the
    bracket is narrower than the tolerance. Iterates with zero entries
    (reducible matrices) fall back to a step-size rule that must hold on
    three consecutive iterations.

    Returns (lam, vec, iterations, converged).
    """
    T = np.asarray(T, dtype=float)
    n = T.shape[0]
    shift = T.sum() / n
    x = np.full(n, 1.0 / n)
    if shift == 0.0:
        return 0.0, x, 0, True
    A = T + shift * np.eye(n)
    prev, prev_step, quiet = np.inf, np.inf, 0
    for it in range(1, max_iter + 1):
        y = A @ x
        s = y.sum()
        est = s - shift
        limit = tol * max(1.0, abs(est))
        if (x > 0).all():
            ratios = y / x
            if ratios.max() - ratios.min() <= limit:
                return float(max(est, 0.0)), y / s, it, True
        x = y / s
        step = abs(est - prev)
        # geometric tail: remaining error ~ step * r / (1 - r) with r the contraction rate
        rate = min(step / prev_step, 0.999) if np.isfinite(prev_step) and prev_step > 0 else 0.0
        quiet = quiet + 1 if step <= limit * (1.0 - rate) else 0
        if quiet >= 3:
            return float(max(est, 0.0)), x, it, True
        prev, prev_step = est, step
    return float(max(prev, 0.0)), x, max_iter, False


def _dense_perron(T) -> tuple[float, np.ndarray]:
    w, V = np.linalg.eig(T)
    k = int(np.argmax(w.real))
    lam = float(max(w[k].real, 0.0))
    v = np.abs(V[:, k].real)
    s = v.sum()
    if not np.isfinite(s) or s == 0:
        v = np.full(T.shape[0], 1.0 / T.shape[0])
    else:
        v = v / s
    return lam, v


def largest_eigenvalue(T, tol: float = 1e-10, max_iter: int = 10_000) -> tuple[float, np.ndarray]:
    """Spectral radius of a nonnegative matrix and its nonnegative eigenvector.

    The eigenvector has unit 1-norm. Power iteration is tried first; if it
    stalls or leaves a large residual, matrices up to 64 x 64 fall back to a
    dense eigensolver.
    """
    T = np.asarray(T, dtype=float)
    if T.ndim != 2 or T.shape[0] != T.shape[1]:
        raise ValueError(f"square matrix required, got shape {T.shape}")
    if not np.isfinite(T).all():
        raise NumericalError("transmission matrix has non-finite entries")
    if (T < 0).any():
        raise ValueError("transmission matrix must be nonnegative")
    n = T.shape[0]
    if n == 0:
        return 0.0, np.zeros(0)
    lam, vec, iters, converged = power_iteration(T, tol=tol, max_iter=max_iter)
    scale = max(1.0, lam)
    residual = float(np.abs(T @ vec - lam * vec).sum())
    if converged and residual <= 1e-6 * scale:
        return lam, vec
    diagnostics = {"iterations": iters, "converged": converged, "residual": residual, "estimate": lam, "n": n}
    if n <= DENSE_FALLBACK_MAX_N:
        logger.debug("power iteration stalled (%s); using dense solver", diagnostics)
        lam, vec = _dense_perron(T)
        residual = float(np.abs(T @ vec - lam * vec).sum())
        if residual <= 1e-6 * max(1.0, lam) or lam == 0.0:
            return lam, vec
        diagnostics.update(dense_residual=residual, dense_estimate=lam)
    raise NumericalError("largest eigenvalue did not converge", diagnostics)


@dataclass(frozen=True)
class ShockPath:
    norms: np.ndarray
    explosive: bool

    def ratios(self) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            return self.norms[1:] / self.norms[:-1]


def simulate_shock(T, s0, steps: int) -> ShockPath:
    """Iterate ``S_k = T S_{k-1}`` and record ``|S_k|_1`` for k = 0..steps.

    The run stops early, flagged explosive, once the norm overflows.
    """
    T = np.asarray(T, dtype=float)
    s = np.asarray(s0, dtype=float).copy()
    if (s < 0).any():
        raise ValueError("initial shock must be nonnegative")
    if steps < 1:
        raise ValueError("steps must be at least 1")
    norms = [float(np.abs(s).sum())]
    explosive = False
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(steps):
            s = T @ s
            nrm = float(np.abs(s).sum())
            if not np.isfinite(nrm) or nrm > EXPLOSIVE_NORM:
                explosive = True
                break
            norms.append(nrm)
    return ShockPath(np.array(norms), explosive)


def build_model(
    net: FlowNetwork,
    w_kind: str = "probability",
    u_denominator: str = "inflow",
    tol: float = 1e-10,
    max_iter: int = 10_000,
) -> TransmissionModel:
    """Node, distribution and edge factors of a flow network, assembled and solved.

    The pipeline default divides flows by the sender's inflow, which makes
    ``U.T @ N`` column-stochastic; ``u_denominator="outflow"`` gives
    row-normalized shares instead.
    """
    node = node_factors(net.G)
    U = distribution_matrix(net.G, u_denominator)
    E = edge_factors(net.G, w_kind, P=net.P, Q=net.Q)
    T = assemble(node, U, E)
    lam, vec = largest_eigenvalue(T, tol=tol, max_iter=max_iter)
    return TransmissionModel(
        markets=net.markets,
        node=node,
        U=U,
        E=E,
        T=T,
        lam=lam,
        eigvec=vec,
        w_kind=w_kind,
        u_denominator=u_denominator,
        empty=net.is_empty,
    )
