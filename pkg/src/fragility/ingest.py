"""Index-level loading, calendar alignment, and return computation."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from datetime import date
from pathlib import Path

import numpy as np
import pandas as pd

from .config import IngestConfig
from .errors import ConfigError, InsufficientDataError, ParseError, ValidationError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class IndexPanel:
    """Date-by-market index levels. Missing cells are NaN."""

    dates: tuple[str, ...]
    markets: tuple[str, ...]
    levels: np.ndarray

    def __post_init__(self):
        levels = np.asarray(self.levels, dtype=float)
        if levels.ndim != 2 or levels.shape != (len(self.dates), len(self.markets)):
            raise ValidationError(
                f"levels shape {levels.shape} does not match "
                f"{len(self.dates)} dates x {len(self.markets)} markets"
            )
        if len(set(self.markets)) != len(self.markets):
            raise ValidationError("duplicate market identifiers")
        for a, b in zip(self.dates, self.dates[1:]):
            if not a < b:
                raise ValidationError(f"dates must be strictly increasing: {a} then {b}")
        with np.errstate(invalid="ignore"):
            bad = np.argwhere(levels <= 0)
        if bad.size:
            r, c = bad[0]
            raise ValidationError(
                f"non-positive level {levels[r, c]} on {self.dates[r]} for {self.markets[c]}"
            )
        if np.isinf(levels).any():
            raise ValidationError("infinite index level")
        levels.setflags(write=False)
        object.__setattr__(self, "dates", tuple(self.dates))
        object.__setattr__(self, "markets", tuple(self.markets))
        object.__setattr__(self, "levels", levels)

    @property
    def n_dates(self) -> int:
        return len(self.dates)

    @property
    def n_markets(self) -> int:
        return len(self.markets)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.levels, index=list(self.dates), columns=list(self.markets))

    def select(self, markets) -> "IndexPanel":
        idx = [self.markets.index(m) for m in markets]
        return IndexPanel(self.dates, tuple(markets), self.levels[:, idx])


@dataclass(frozen=True)
class ReturnPanel:
    """Returns and return differences for one time shift.

    ``returns`` row ``k`` belongs to ``return_dates[k]``; ``diffs`` row ``k``
    belongs to ``diff_dates[k]`` and equals ``returns[k + 1] - returns[k]``.
    """

    return_dates: tuple[str, ...]
    diff_dates: tuple[str, ...]
    markets: tuple[str, ...]
    returns: np.ndarray
    diffs: np.ndarray
    time_shift: int
    kind: str = "simple"

    def series(self, basis: str) -> tuple[tuple[str, ...], np.ndarray]:
        """Dates and values of the series a jump basis refers to."""
        if basis == "diff":
            return self.diff_dates, self.diffs
        if basis == "return":
            return self.return_dates, self.returns
        raise ConfigError(f"unknown basis {basis!r}; expected 'diff' or 'return'")


def load_index_csv(path, config: IngestConfig | None = None) -> IndexPanel:
    """Read ``date,<market1>,<market2>,...`` and align the calendars.

    Missing cells are forward-filled from the last observed level for at most
    ``config.max_ffill_days`` consecutive rows; rows still missing more than
    ``config.missing_row_frac`` of markets are then dropped.
    """
    config = config or IngestConfig()
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("empty file", row=1) from None
        header = [h.strip() for h in header]
        if len(header) < 2:
            raise ParseError("header needs a date column and at least one market", row=1)
        markets = header[1:]
        for j, m in enumerate(markets, start=2):
            if not m:
                raise ParseError("empty market identifier", row=1, column=j)
        if len(set(markets)) != len(markets):
            raise ParseError("duplicate market identifiers in header", row=1)

        dates: list[str] = []
        rows: list[list[float]] = []
        for lineno, rec in enumerate(reader, start=2):
            if not rec or all(not cell.strip() for cell in rec):
                continue
            if len(rec) != len(header):
                raise ParseError(f"expected {len(header)} fields, found {len(rec)}", row=lineno)
            raw_date = rec[0].strip()
            try:
                date.fromisoformat(raw_date)
            except ValueError:
                raise ParseError(f"bad ISO-8601 date {raw_date!r}", row=lineno, column=header[0]) from None
            if len(raw_date) != 10:
                raise ParseError(f"date must be YYYY-MM-DD, got {raw_date!r}", row=lineno, column=header[0])
            values = []
            for name, cell in zip(markets, rec[1:]):
                cell = cell.strip()
                if not cell:
                    values.append(np.nan)
                    continue
                try:
                    x = float(cell)
                except ValueError:
                    raise ParseError(f"non-numeric value {cell!r}", row=lineno, column=name) from None
                if not np.isfinite(x):
                    raise ParseError(f"non-finite value {cell!r}", row=lineno, column=name)
                if x <= 0:
                    raise ValidationError(f"non-positive level {x} at row {lineno}, column {name!r}")
                values.append(x)
            dates.append(raw_date)
            rows.append(values)

    levels = np.array(rows, dtype=float).reshape(len(rows), len(markets))
    for a, b in zip(dates, dates[1:]):
        if not a < b:
            raise ValidationError(f"dates must be strictly increasing: {a} then {b}")
    return align(dates, markets, levels, config)


def align(dates, markets, levels, config: IngestConfig | None = None) -> IndexPanel:
    """Apply the forward-fill and row-drop policy to a raw level matrix."""
    config = config or IngestConfig()
    frame = pd.DataFrame(np.asarray(levels, dtype=float), index=list(dates), columns=list(markets))
    if config.max_ffill_days > 0:
        frame = frame.ffill(limit=config.max_ffill_days)
    missing_frac = frame.isna().mean(axis=1).to_numpy()
    keep = missing_frac <= config.missing_row_frac
    dropped = int((~keep).sum())
    if dropped:
        logger.info("dropped %d of %d rows with too many missing markets", dropped, len(keep))
    frame = frame.loc[keep]
    if len(frame) < 2:
        raise InsufficientDataError(f"need at least 2 usable rows, found {len(frame)}")
    counts = frame.notna().sum(axis=0)
    thin = [m for m, c in counts.items() if c < 2]
    if thin:
        raise InsufficientDataError(f"markets with fewer than 2 levels: {thin}")
    return IndexPanel(tuple(frame.index), tuple(frame.columns), frame.to_numpy())


def compute_returns(panel: IndexPanel, dt: int = 1, kind: str = "simple") -> ReturnPanel:
    """Returns ``i_t / i_{t-dt} - 1`` and their day-over-day differences.

    ``kind="log"`` swaps in ``log(i_t / i_{t-dt})`` for comparison runs.
    Cells touching a missing level stay NaN.
    """
    if isinstance(dt, bool) or not isinstance(dt, (int, np.integer)) or dt < 1:
        raise ConfigError(f"time shift must be a positive integer, got {dt!r}")
    n = panel.n_dates
    if dt >= n:
        raise InsufficientDataError(f"time shift {dt} needs more than {n} rows")
    lv = panel.levels
    ratio = lv[dt:] / lv[:-dt]
    if kind == "simple":
        returns = ratio - 1.0
    elif kind == "log":
        returns = np.log(ratio)
    else:
        raise ConfigError(f"unknown return kind {kind!r}")
    diffs = returns[1:] - returns[:-1]
    return ReturnPanel(
        return_dates=panel.dates[dt:],
        diff_dates=panel.dates[dt + 1:],
        markets=panel.markets,
        returns=returns,
        diffs=diffs,
        time_shift=int(dt),
        kind=kind,
    )


def write_index_csv(panel: IndexPanel, path) -> None:
    """Write levels in the format ``load_index_csv`` reads; NaN becomes an empty cell."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date", *panel.markets])
        for d, row in zip(panel.dates, panel.levels):
            w.writerow([d, *("" if np.isnan(x) else repr(float(x)) for x in row)])
