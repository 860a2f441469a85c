"""End-to-end wiring from index levels to the stability indicator."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import RunConfig
from .errors import ConfigError
from .ingest import IndexPanel, ReturnPanel, compute_returns
from .jumps import JumpPanel, JumpStats, standardize
from .network import FlowNetwork, build_network
from .rolling import InstabilityPeriod, StabilitySeries, run, segment_instability
from .shock import TransmissionModel, build_model


@dataclass(frozen=True)
class Analysis:
    returns: ReturnPanel
    stats: JumpStats
    jumps: JumpPanel
    series: StabilitySeries
    periods: list[InstabilityPeriod]

    def summary(self) -> dict:
        s = self.series
        k_lam = int(np.argmax(s.lambdas))
        k_flow = int(np.argmax(s.total_flows))
        return {
            "markets": len(self.jumps.markets),
            "dropped_markets": sorted(self.stats.dropped),
            "windows": len(s),
            "instability_periods": len(self.periods),
            "peak_lambda": float(s.lambdas[k_lam]),
            "peak_lambda_date": s.window_ends[k_lam],
            "peak_total_flow": float(s.total_flows[k_flow]),
            "peak_total_flow_date": s.window_ends[k_flow],
            "jump_frequency": self.jumps.frequency(),
        }


def prepare_jumps(panel: IndexPanel, cfg: RunConfig) -> tuple[ReturnPanel, JumpStats, JumpPanel]:
    returns = compute_returns(panel, cfg.time_shift, kind=cfg.return_kind)
    stats, jumps = standardize(returns, cutoff=cfg.cutoff, basis=cfg.basis, min_obs=cfg.min_obs)
    return returns, stats, jumps


def indicator_series(panel: IndexPanel, cfg: RunConfig) -> StabilitySeries:
    _, _, jumps = prepare_jumps(panel, cfg)
    return run(jumps, config=cfg)


def analyze(panel: IndexPanel, cfg: RunConfig) -> Analysis:
    returns, stats, jumps = prepare_jumps(panel, cfg)
    series = run(jumps, config=cfg)
    periods = segment_instability(series, threshold=cfg.threshold, min_run=cfg.min_run)
    return Analysis(returns, stats, jumps, series, periods)


def snapshot(panel: IndexPanel, cfg: RunConfig, start: str, end: str) -> tuple[FlowNetwork, TransmissionModel]:
    """Network and transmission model over the jump rows dated ``start..end``."""
    _, _, jumps = prepare_jumps(panel, cfg)
    if start > end:
        raise ConfigError(f"snapshot start {start} is after end {end}")
    if start < jumps.dates[0] or end > jumps.dates[-1]:
        raise ConfigError(f"snapshot window {start}..{end} outside data range {jumps.dates[0]}..{jumps.dates[-1]}")
    rows = [k for k, d in enumerate(jumps.dates) if start <= d <= end]
    if not rows:
        raise ConfigError(f"no observations between {start} and {end}")
    I = np.nan_to_num(jumps.jumps[rows[0]:rows[-1] + 1]).astype(np.int8)
    net = build_network(I, jumps.markets, exponents=cfg.exponents, window=(jumps.dates[rows[0]], jumps.dates[rows[-1]]))
    model = build_model(net, w_kind=cfg.w_kind, u_denominator=cfg.u_denominator, tol=cfg.eig_tol, max_iter=cfg.eig_max_iter)
    return net, model
