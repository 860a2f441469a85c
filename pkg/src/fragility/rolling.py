"""Rolling-window stability indicator and instability-period segmentation."""

from __future__ import annotations

import csv
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import RunConfig
from .decomposition import ContributionTriple, contributions
from .errors import ConfigError
from .jumps import JumpPanel
from .network import build_network, total_flow
from .shock import build_model

logger = logging.getLogger(__name__)

SERIES_COLUMNS = ("window_end", "lambda", "total_flow", "node_contrib", "flow_contrib", "edge_contrib", "unstable_flag")
PERIOD_COLUMNS = ("start", "end", "peak_lambda", "mean_total_flow")


@dataclass(frozen=True)
class StabilitySeries:
    window_ends: tuple[str, ...]
    lambdas: np.ndarray
    total_flows: np.ndarray
    contributions: tuple[ContributionTriple, ...]
    window_size: int
    stride: int = 1
    empty: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=bool))

    def __len__(self) -> int:
        return len(self.window_ends)


@dataclass(frozen=True)
class InstabilityPeriod:
    start: str
    end: str
    peak_lambda: float
    mean_total_flow: float
    first: int
    last: int

    @property
    def length(self) -> int:
        return self.last - self.first + 1


def window_starts(n_rows: int, window: int, stride: int = 1) -> range:
    return range(0, n_rows - window + 1, stride)


def _chunk(args):
    (jumps, markets, dates, starts, window, prev_start, cfg, with_contrib) = args
    lam, flows, empty, contribs = [], [], [], []
    prev = None
    if with_contrib and prev_start is not None:
        prev = _model(jumps, markets, dates, prev_start, window, cfg)[0]
    for s in starts:
        model, net = _model(jumps, markets, dates, s, window, cfg)
        lam.append(model.lam)
        flows.append(total_flow(net.G, double=cfg.total_flow_double)[0])
        empty.append(model.empty)
        if with_contrib and prev is not None:
            contribs.append(
                contributions(
                    prev, model, h_rel=cfg.h_rel, mode=cfg.fd_mode, tol=cfg.eig_tol,
                    max_iter=cfg.eig_max_iter, window_end=dates[s + window - 1],
                )
            )
        prev = model
    return lam, flows, empty, contribs


def _model(jumps, markets, dates, s, window, cfg):
    net = build_network(jumps[s:s + window], markets, exponents=cfg.exponents, window=(dates[s], dates[s + window - 1]))
    model = build_model(net, w_kind=cfg.w_kind, u_denominator=cfg.u_denominator, tol=cfg.eig_tol, max_iter=cfg.eig_max_iter)
    return model, net


def run(jumps: JumpPanel, window: int | None = None, stride: int | None = None, config: RunConfig | None = None) -> StabilitySeries:
    """Slide a window over the jump panel and compute the indicator per position.

    Windows are split into contiguous chunks for up to ``config.jobs``
    worker processes; every window is computed the same way regardless of
    the split, so results do not depend on scheduling.
    """
    cfg = config or RunConfig()
    window = cfg.window if window is None else window
    stride = cfg.stride if stride is None else stride
    if window < 30:
        raise ConfigError(f"window must be at least 30, got {window}")
    if stride < 1:
        raise ConfigError(f"stride must be positive, got {stride}")
    n_rows = jumps.n_dates
    if window > n_rows:
        raise ConfigError(f"window {window} exceeds the {n_rows} rows of the jump panel")
    starts = list(window_starts(n_rows, window, stride))
    I = np.nan_to_num(jumps.jumps).astype(np.int8)
    with_contrib = cfg.contributions and len(starts) > 1

    jobs = max(1, min(cfg.jobs, len(starts)))
    n_chunks = 1 if jobs == 1 else min(len(starts), jobs * 4)
    bounds = np.linspace(0, len(starts), n_chunks + 1).astype(int)
    tasks = []
    for a, b in zip(bounds[:-1], bounds[1:]):
        prev_start = starts[a - 1] if a > 0 else None
        tasks.append((I, jumps.markets, jumps.dates, starts[a:b], window, prev_start, cfg, with_contrib))
    if jobs == 1:
        results = [_chunk(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_chunk, tasks))

    lam, flows, empty, contribs = [], [], [], []
    for r in results:
        lam += r[0]
        flows += r[1]
        empty += r[2]
        contribs += r[3]
    n_empty = int(np.sum(empty))
    if n_empty:
        logger.warning("%d window(s) without any jump; lambda recorded as 0", n_empty)
    return StabilitySeries(
        window_ends=tuple(jumps.dates[s + window - 1] for s in starts),
        lambdas=np.array(lam),
        total_flows=np.array(flows),
        contributions=tuple(contribs),
        window_size=window,
        stride=stride,
        empty=np.array(empty, dtype=bool),
    )


def segment_instability(series, threshold: float = 1.0, min_run: int = 10, total_flows=None, window_ends=None) -> list[InstabilityPeriod]:
    """Maximal stretches with ``lambda >= threshold``.

    Super-threshold runs separated by fewer than ``min_run`` sub-threshold
    windows are merged first; merged stretches shorter than ``min_run``
    windows are discarded. ``series`` may be a StabilitySeries or a plain
    lambda sequence.
    """
    if isinstance(series, StabilitySeries):
        lam = np.asarray(series.lambdas, dtype=float)
        flows = np.asarray(series.total_flows, dtype=float)
        ends = series.window_ends
    else:
        lam = np.asarray(series, dtype=float)
        flows = np.zeros_like(lam) if total_flows is None else np.asarray(total_flows, dtype=float)
        ends = tuple(range(len(lam))) if window_ends is None else tuple(window_ends)
    if lam.size == 0:
        raise ValueError("empty series")
    above = lam >= threshold
    runs: list[list[int]] = []
    k = 0
    while k < lam.size:
        if above[k]:
            j = k
            while j + 1 < lam.size and above[j + 1]:
                j += 1
            if runs and k - runs[-1][1] - 1 < min_run:
                runs[-1][1] = j
            else:
                runs.append([k, j])
            k = j + 1
        else:
            k += 1
    periods = []
    for a, b in runs:
        if b - a + 1 < min_run:
            continue
        periods.append(
            InstabilityPeriod(
                start=ends[a],
                end=ends[b],
                peak_lambda=float(lam[a:b + 1].max()),
                mean_total_flow=float(flows[a:b + 1].mean()),
                first=a,
                last=b,
            )
        )
    return periods


def unstable_flags(n: int, periods) -> np.ndarray:
    flags = np.zeros(n, dtype=np.int8)
    for p in periods:
        flags[p.first:p.last + 1] = 1
    return flags


def write_series_csv(series: StabilitySeries, periods, path) -> None:
    flags = unstable_flags(len(series), periods)
    by_end = {t.window_end: t for t in series.contributions}
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SERIES_COLUMNS)
        for k, end in enumerate(series.window_ends):
            t = by_end.get(end)
            contrib = ["", "", ""] if t is None else [repr(t.node_contrib), repr(t.flow_contrib), repr(t.edge_contrib)]
            w.writerow([end, repr(float(series.lambdas[k])), repr(float(series.total_flows[k])), *contrib, int(flags[k])])


def write_periods_csv(periods, path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PERIOD_COLUMNS)
        for p in periods:
            w.writerow([p.start, p.end, repr(p.peak_lambda), repr(p.mean_total_flow)])
