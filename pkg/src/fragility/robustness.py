"""Normality diagnostics for the jump cutoff and parameter sweeps with percentile bands."""

from __future__ import annotations

import csv
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats as sps

from .config import RunConfig, SWEEP_AXES
from .errors import ConfigError, DataError
from .ingest import IndexPanel
from .jumps import JumpStats, trim_outliers
from .pipeline import indicator_series

logger = logging.getLogger(__name__)

TAIL_Z = 2.0
DKW_ALPHA = 0.01
AXIS_RANGES = {"time_shift": (1, 120), "cutoff": (1.8, 2.2), "window": (60, 120)}


@dataclass(frozen=True)
class MarketNormality:
    market: str
    theoretical_pct: np.ndarray
    empirical_pct: np.ndarray
    theoretical_q: np.ndarray
    empirical_q: np.ndarray
    max_pp_dev: float
    tail_pp_dev: float
    band: float
    tail_flag: bool


@dataclass(frozen=True)
class NormalityReport:
    markets: dict[str, MarketNormality]
    skipped: dict[str, str] = field(default_factory=dict)

    def summary_rows(self):
        for m, r in self.markets.items():
            yield m, r.max_pp_dev, r.tail_pp_dev, r.band, r.tail_flag, len(r.empirical_q)


def empirical_percentile(sorted_values, value) -> float:
    """Percentile of ``value`` within a sorted sample, Hazen plotting positions."""
    x = np.asarray(sorted_values, dtype=float)
    p = 100.0 * (np.arange(1, x.size + 1) - 0.5) / x.size
    return float(np.interp(value, x, p))


def market_normality(market: str, x, mu: float, sigma: float) -> MarketNormality:
    """P-P and Q-Q arrays of the outlier-removed, standardized series.

    Empirical probabilities use Hazen positions ``(k - 0.5) / n``. The tail
    flag is raised when, among points with ``|z| > 2``, the P-P gap exceeds
    the 99% Dvoretzky-Kiefer-Wolfowitz band for the sample size.
    """
    x = np.asarray(x, dtype=float)
    x = x[np.isfinite(x)]
    kept, _, _ = trim_outliers(x)
    z = np.sort((kept - mu) / sigma)
    n = z.size
    p = (np.arange(1, n + 1) - 0.5) / n
    theo_p = sps.norm.cdf(z)
    dev = np.abs(theo_p - p)
    tail = np.abs(z) > TAIL_Z
    tail_dev = float(dev[tail].max()) if tail.any() else 0.0
    band = float(np.sqrt(np.log(2.0 / DKW_ALPHA) / (2.0 * n)))
    return MarketNormality(
        market=market,
        theoretical_pct=100.0 * theo_p,
        empirical_pct=100.0 * p,
        theoretical_q=sps.norm.ppf(p),
        empirical_q=z,
        max_pp_dev=float(dev.max()),
        tail_pp_dev=tail_dev,
        band=band,
        tail_flag=bool(tail_dev > band),
    )


def normality_diagnostics(values, markets, stats: JumpStats) -> NormalityReport:
    values = np.asarray(values, dtype=float)
    if values.ndim == 1:
        values = values[:, None]
    out, skipped = {}, dict(stats.dropped)
    for j, m in enumerate(markets):
        if m not in stats.markets:
            skipped.setdefault(m, "no statistics (degenerate or too short)")
            continue
        k = stats.index(m)
        out[m] = market_normality(m, values[:, j], stats.mu[k], stats.sigma[k])
    return NormalityReport(out, skipped)


def write_normality_csv(report: NormalityReport, out_dir) -> dict[str, Path]:
    """Summary CSV plus one P-P/Q-Q point file per market."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {}
    p = out_dir / "normality_summary.csv"
    with p.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["market", "n", "max_pp_dev", "tail_pp_dev", "dkw_band", "tail_flag", "note"])
        for m, r in report.markets.items():
            w.writerow([m, len(r.empirical_q), repr(r.max_pp_dev), repr(r.tail_pp_dev), repr(r.band), int(r.tail_flag), ""])
        for m, why in report.skipped.items():
            w.writerow([m, 0, "", "", "", "", why])
    paths["summary"] = p
    for m, r in report.markets.items():
        q = out_dir / f"normality_{_safe(m)}.csv"
        with q.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["theoretical_pct", "empirical_pct", "theoretical_q", "empirical_q"])
            for row in zip(r.theoretical_pct, r.empirical_pct, r.theoretical_q, r.empirical_q):
                w.writerow([repr(float(v)) for v in row])
        paths[m] = q
    return paths


def _safe(name: str) -> str:
    return "".join(ch if ch.isalnum() or ch in "-_." else "_" for ch in name)


@dataclass(frozen=True)
class SweepResult:
    axis: str
    parameter_values: tuple
    window_ends: tuple[str, ...]
    series_matrix: np.ndarray
    band_low: np.ndarray
    band_high: np.ndarray
    baseline: np.ndarray
    skipped: dict = field(default_factory=dict)


def default_values(axis: str, config: RunConfig | None = None) -> list:
    cfg = config or RunConfig()
    if axis == "basis":
        return ["diff", "return"]
    if axis == "time_shift":
        return list(range(1, 121, cfg.sweep_time_shift_stride))
    if axis == "cutoff":
        return [round(1.8 + 0.005 * k, 3) for k in range(81)]
    if axis == "window":
        return list(range(60, 121))
    raise ConfigError(f"unknown sweep axis {axis!r}")


def _check_values(axis, values):
    if axis not in SWEEP_AXES:
        raise ConfigError(f"sweep axis must be one of {SWEEP_AXES}, got {axis!r}")
    if not values:
        raise ConfigError("sweep needs at least one value")
    if axis == "basis":
        bad = [v for v in values if v not in ("diff", "return")]
    else:
        lo, hi = AXIS_RANGES[axis]
        bad = [v for v in values if not lo - 1e-12 <= float(v) <= hi + 1e-12]
        if axis in ("time_shift", "window"):
            bad += [v for v in values if float(v) != int(v)]
    if bad:
        raise ConfigError(f"values outside the {axis} sweep range: {bad}")


def _variant(base: RunConfig, axis: str, value) -> RunConfig:
    if axis == "basis":
        return base.replace(basis=value, contributions=False)
    if axis == "time_shift":
        return base.replace(time_shift=int(value), contributions=False)
    if axis == "cutoff":
        return base.replace(cutoff=float(value), contributions=False)
    return base.replace(window=int(value), contributions=False)


def _one(args):
    panel, cfg = args
    try:
        series = indicator_series(panel, cfg.replace(jobs=1))
    except (ConfigError, DataError) as exc:
        return None, str(exc)
    return (series.window_ends, series.lambdas), None


def sweep(panel: IndexPanel, axis: str, values=None, base_config: RunConfig | None = None, jobs: int | None = None) -> SweepResult:
    """Re-run the full pipeline for every value of one parameter.

    Series are joined on the window-end dates present in every run, and the
    5th/95th percentiles across runs are taken date by date. Values that
    cannot run on this panel are skipped and reported.
    """
    base = base_config or RunConfig()
    values = list(default_values(axis, base) if values is None else values)
    _check_values(axis, values)
    jobs = base.jobs if jobs is None else jobs
    base_run = base.replace(contributions=False)
    tasks = [(panel, base_run)] + [(panel, _variant(base, axis, v)) for v in values]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_one, tasks))
    else:
        results = [_one(t) for t in tasks]
    (base_res, base_err), rest = results[0], results[1:]
    if base_res is None:
        raise ConfigError(f"baseline configuration cannot run: {base_err}")
    kept_values, runs, skipped = [], [], {}
    for v, (res, err) in zip(values, rest):
        if res is None:
            skipped[v] = err
            logger.warning("sweep value %r skipped: %s", v, err)
            continue
        kept_values.append(v)
        runs.append(dict(zip(*res)))
    if not runs:
        raise ConfigError("no sweep value could be run on this panel")
    baseline = dict(zip(*base_res))
    common = set(baseline)
    for r in runs:
        common &= set(r)
    ends = tuple(sorted(common))
    if not ends:
        raise DataError("sweep runs share no window-end dates")
    mat = np.array([[r[d] for d in ends] for r in runs])
    low, high = np.percentile(mat, [5.0, 95.0], axis=0)
    return SweepResult(
        axis=axis,
        parameter_values=tuple(kept_values),
        window_ends=ends,
        series_matrix=mat,
        band_low=low,
        band_high=high,
        baseline=np.array([baseline[d] for d in ends]),
        skipped=skipped,
    )


def write_sweep_csv(result: SweepResult, path, full_path=None) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["window_end", "baseline", "band_low", "band_high"])
        for k, d in enumerate(result.window_ends):
            w.writerow([d, repr(float(result.baseline[k])), repr(float(result.band_low[k])), repr(float(result.band_high[k]))])
    if full_path is not None:
        with Path(full_path).open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["window_end", *(f"{result.axis}={v}" for v in result.parameter_values)])
            for k, d in enumerate(result.window_ends):
                w.writerow([d, *(repr(float(x)) for x in result.series_matrix[:, k])])
