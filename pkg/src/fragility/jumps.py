"""Outlier-robust standardization and return-jump indicators."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, DegenerateMarketError, InsufficientDataError
from .ingest import ReturnPanel

logger = logging.getLogger(__name__)

IQR_FACTOR = 1.5


@dataclass(frozen=True)
class JumpStats:
    """Full-sample location/scale per market, estimated after IQR trimming."""

    markets: tuple[str, ...]
    mu: np.ndarray
    sigma: np.ndarray
    q1: np.ndarray
    q3: np.ndarray
    n_kept: np.ndarray
    dropped: dict[str, str] = field(default_factory=dict)

    def index(self, market: str) -> int:
        return self.markets.index(market)


@dataclass(frozen=True)
class JumpPanel:
    dates: tuple[str, ...]
    markets: tuple[str, ...]
    z: np.ndarray
    jumps: np.ndarray
    cutoff: float
    basis: str

    @property
    def n_dates(self) -> int:
        return len(self.dates)

    def frequency(self) -> float:
        """Share of finite z-scores flagged as jumps."""
        finite = np.isfinite(self.z)
        return float(self.jumps[finite].sum() / max(finite.sum(), 1))


def trim_outliers(x: np.ndarray) -> tuple[np.ndarray, float, float]:
    """Drop points outside ``[q1 - 1.5 IQR, q3 + 1.5 IQR]``; returns (kept, q1, q3)."""
    q1, q3 = np.percentile(x, [25.0, 75.0])
    iqr = q3 - q1
    lo, hi = q1 - IQR_FACTOR * iqr, q3 + IQR_FACTOR * iqr
    kept = x[(x >= lo) & (x <= hi)]
    return kept, float(q1), float(q3)


def series_stats(x, min_obs: int = 30) -> tuple[float, float, float, float, int]:
    """(mu, sigma, q1, q3, n_kept) for one market's series, NaNs ignored.

    Raises InsufficientDataError below ``min_obs`` observations and
    DegenerateMarketError when the trimmed series has zero spread.
    """
    x = np.asarray(x, dtype=float)
    x = x[np.isfinite(x)]
    if x.size < min_obs:
        raise InsufficientDataError(f"{x.size} observations, need at least {min_obs}")
    kept, q1, q3 = trim_outliers(x)
    if kept.size < 2:
        raise DegenerateMarketError("fewer than two points survive outlier removal")
    mu = float(kept.mean())
    sigma = float(kept.std(ddof=1))
    if not sigma > 0:
        raise DegenerateMarketError("zero standard deviation after outlier removal")
    return mu, sigma, q1, q3, int(kept.size)


def compute_stats(values, markets, min_obs: int = 30) -> JumpStats:
    """Per-market statistics over the whole sample.

    Markets that are too short or degenerate are left out of the result and
    recorded in ``dropped`` with the reason.
    """
    values = np.asarray(values, dtype=float)
    if values.ndim == 1:
        values = values[:, None]
    markets = tuple(markets)
    if values.shape[1] != len(markets):
        raise ValueError("column count does not match market list")
    keep, rows, dropped = [], [], {}
    for j, m in enumerate(markets):
        try:
            rows.append(series_stats(values[:, j], min_obs=min_obs))
            keep.append(m)
        except (DegenerateMarketError, InsufficientDataError) as exc:
            dropped[m] = str(exc)
            logger.warning("market %s excluded: %s", m, exc)
    if not keep:
        raise InsufficientDataError("no market has usable statistics")
    arr = np.array(rows, dtype=float)
    return JumpStats(
        markets=tuple(keep),
        mu=arr[:, 0],
        sigma=arr[:, 1],
        q1=arr[:, 2],
        q3=arr[:, 3],
        n_kept=arr[:, 4].astype(int),
        dropped=dropped,
    )


def detect_jumps(panel: ReturnPanel, stats: JumpStats, cutoff: float = 2.0, basis: str = "diff") -> JumpPanel:
    """Standardize the chosen series with ``stats`` and flag ``|z| > cutoff``.

    Missing values give a NaN z-score and no jump.
    """
    if basis not in ("diff", "return"):
        raise ConfigError(f"unknown basis {basis!r}; expected 'diff' or 'return'")
    if not cutoff > 0:
        raise ConfigError(f"cutoff must be positive, got {cutoff}")
    dates, values = panel.series(basis)
    idx = [panel.markets.index(m) for m in stats.markets]
    x = values[:, idx]
    z = (x - stats.mu) / stats.sigma
    with np.errstate(invalid="ignore"):
        jumps = (np.abs(z) > cutoff).astype(np.int8)
    return JumpPanel(dates=tuple(dates), markets=stats.markets, z=z, jumps=jumps, cutoff=float(cutoff), basis=basis)


def standardize(panel: ReturnPanel, cutoff: float = 2.0, basis: str = "diff", min_obs: int = 30) -> tuple[JumpStats, JumpPanel]:
    """Estimate statistics on the basis series, then detect jumps."""
    _, values = panel.series(basis)
    stats = compute_stats(values, panel.markets, min_obs=min_obs)
    return stats, detect_jumps(panel, stats, cutoff=cutoff, basis=basis)


def write_jump_debug(panel: ReturnPanel, jumps: JumpPanel, out_dir) -> list[Path]:
    """One CSV per market with columns ``date,value,z,jump``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    _, values = panel.series(jumps.basis)
    written = []
    for j, m in enumerate(jumps.markets):
        col = values[:, panel.markets.index(m)]
        path = out_dir / f"jumps_{_safe_name(m)}.csv"
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["date", jumps.basis, "z", "jump"])
            for d, v, z, flag in zip(jumps.dates, col, jumps.z[:, j], jumps.jumps[:, j]):
                w.writerow([d, _fmt(v), _fmt(z), int(flag)])
        written.append(path)
    return written


def _fmt(x: float) -> str:
    return "" if not np.isfinite(x) else repr(float(x))


def _safe_name(name: str) -> str:
    return "".join(ch if ch.isalnum() or ch in "-_." else "_" for ch in name)

