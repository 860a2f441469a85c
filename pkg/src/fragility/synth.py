"""Synthetic index panels with a known co-jump structure.

Jumps come from a one-factor common-shock model. On a systemic day every
market jumps; otherwise market ``i`` jumps on its own with probability
``e_i``. For a marginal jump probability ``q`` and a target conditional
co-jump probability ``k`` the systemic rate is
``pi = q (k - q) / (1 - 2 q + k q)`` and ``e = (q - pi) / (1 - pi)``, which
gives ``P(i jumps | j jumps) = k`` for every pair.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd
import yaml
from scipy import special, stats

from .errors import SpecError
from .ingest import IndexPanel

START_DATE = "2000-01-03"


@dataclass(frozen=True)
class SynthSpec:
    """Parameters of a synthetic panel.

    ``co_jump`` is the conditional co-jump probability before the first
    regime switch; ``0`` means no common factor (independent jumps).
    ``regimes`` lists ``(start_day, co_jump)`` pairs in increasing order,
    where ``start_day`` indexes level rows.
    """

    n_markets: int
    n_days: int
    seed: int
    base_vol: float | tuple[float, ...] = 0.01
    jump_prob: float | tuple[float, ...] = 0.05
    co_jump: float = 0.0
    regimes: tuple[tuple[int, float], ...] = ()
    jump_size: tuple[float, float] = (4.0, 6.0)
    noise_clip: float = 1.0
    reversion: float = 0.02
    start_level: float = 100.0
    markets: tuple[str, ...] | None = None

    def __post_init__(self):
        if self.n_markets < 1 or self.n_days < 4:
            raise SpecError("need at least one market and four days")
        if self.seed is None or int(self.seed) < 0:
            raise SpecError("a non-negative seed is required")
        vol = self._per_market(self.base_vol, "base_vol")
        if (vol <= 0).any():
            raise SpecError("base_vol must be positive")
        q = self._per_market(self.jump_prob, "jump_prob")
        if ((q < 0) | (q >= 1)).any():
            raise SpecError("jump_prob must lie in [0, 1)")
        object.__setattr__(self, "co_jump", _scalar_co_jump(self.co_jump))
        regimes = tuple((int(s), _scalar_co_jump(k)) for s, k in self.regimes)
        starts = [s for s, _ in regimes]
        if starts != sorted(starts) or len(set(starts)) != len(starts):
            raise SpecError("regimes must be ordered by strictly increasing start day")
        if any(s < 0 or s >= self.n_days for s in starts):
            raise SpecError("regime start outside the panel")
        object.__setattr__(self, "regimes", regimes)
        lo, hi = (float(x) for x in self.jump_size)
        if not 0 < lo <= hi:
            raise SpecError("jump_size must satisfy 0 < low <= high")
        object.__setattr__(self, "jump_size", (lo, hi))
        if not self.noise_clip > 0:
            raise SpecError("noise_clip must be positive")
        if not 0 <= self.reversion < 1:
            raise SpecError("reversion must lie in [0, 1)")
        if self.markets is not None:
            if len(self.markets) != self.n_markets or len(set(self.markets)) != self.n_markets:
                raise SpecError("markets must list n_markets distinct names")
            object.__setattr__(self, "markets", tuple(self.markets))
        for k in {self.co_jump, *(k for _, k in regimes)}:
            systemic_rate(q, k)

    def _per_market(self, value, name) -> np.ndarray:
        arr = np.atleast_1d(np.asarray(value, dtype=float))
        if arr.size == 1:
            return np.full(self.n_markets, float(arr[0]))
        if arr.size != self.n_markets:
            raise SpecError(f"{name} needs one value or {self.n_markets}")
        return arr

    @property
    def vol(self) -> np.ndarray:
        return self._per_market(self.base_vol, "base_vol")

    @property
    def q(self) -> np.ndarray:
        return self._per_market(self.jump_prob, "jump_prob")

    @property
    def market_names(self) -> tuple[str, ...]:
        if self.markets is not None:
            return self.markets
        width = len(str(self.n_markets))
        return tuple(f"M{i:0{width}d}" for i in range(1, self.n_markets + 1))

    def co_jump_by_day(self) -> np.ndarray:
        k = np.full(self.n_days, self.co_jump)
        for start, level in self.regimes:
            k[start:] = level
        return k

    @classmethod
    def from_dict(cls, data: dict) -> "SynthSpec":
        known = set(cls.__dataclass_fields__)
        unknown = sorted(set(data) - known)
        if unknown:
            raise SpecError(f"unknown synth keys: {unknown}")
        data = dict(data)
        for key in ("base_vol", "jump_prob"):
            if isinstance(data.get(key), list):
                data[key] = tuple(data[key])
        if "regimes" in data:
            data["regimes"] = tuple(tuple(r) for r in data["regimes"])
        if "jump_size" in data:
            data["jump_size"] = tuple(data["jump_size"])
        if "markets" in data and data["markets"] is not None:
            data["markets"] = tuple(data["markets"])
        try:
            return cls(**data)
        except TypeError as exc:
            raise SpecError(str(exc)) from exc

    @classmethod
    def from_yaml(cls, path) -> "SynthSpec":
        p = Path(path)
        if not p.is_file():
            raise SpecError(f"synth spec not found: {p}")
        data = yaml.safe_load(p.read_text()) or {}
        if not isinstance(data, dict):
            raise SpecError("synth spec must be a mapping")
        return cls.from_dict(data)


def _scalar_co_jump(value) -> float:
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        k = float(arr)
    elif arr.ndim == 2 and arr.shape[0] == arr.shape[1]:
        off = arr[~np.eye(arr.shape[0], dtype=bool)]
        if off.size and not np.allclose(off, off[0]):
            raise SpecError("a one-factor generator only realizes homogeneous co_jump matrices")
        k = float(off[0]) if off.size else 0.0
    else:
        raise SpecError("co_jump must be a scalar or a square matrix")
    if not 0.0 <= k <= 1.0:
        raise SpecError(f"co_jump must lie in [0, 1], got {k}")
    return k


def systemic_rate(q, co_jump: float) -> float:
    """Daily probability of a systemic jump day for a target co-jump level.

    Uses the mean marginal probability; raises SpecError when the target is
    below independence or the systemic rate exceeds some market's marginal.
    """
    q = np.atleast_1d(np.asarray(q, dtype=float))
    if co_jump == 0.0:
        return 0.0
    qbar = float(q.mean())
    if co_jump < qbar - 1e-12:
        raise SpecError(
            f"co_jump {co_jump} is below the independence level {qbar:.4g}; "
            "a common-shock model cannot produce negative dependence"
        )
    pi = qbar * (co_jump - qbar) / (1.0 - 2.0 * qbar + co_jump * qbar)
    if pi > q.min() + 1e-12:
        raise SpecError(f"co_jump {co_jump} needs systemic rate {pi:.4g} above a market's jump probability")
    return float(max(pi, 0.0))


@dataclass(frozen=True)
class GroundTruth:
    """Designed jump indicators aligned with the return-difference dates."""

    dates: tuple[str, ...]
    markets: tuple[str, ...]
    jumps: np.ndarray
    systemic: np.ndarray
    co_jump_target: np.ndarray
    regimes: tuple[tuple[int, float], ...] = field(default_factory=tuple)

    def co_jump_counts(self, rows=slice(None)) -> np.ndarray:
        I = self.jumps[rows].astype(np.int64)
        return I.T @ I

    def conditional_frequency(self, rows=slice(None)) -> float:
        """Mean off-diagonal conditional co-jump frequency over ``rows``."""
        c = self.co_jump_counts(rows).astype(float)
        counts = np.diag(c)
        n = c.shape[0]
        vals = [c[i, j] / counts[j] for i in range(n) for j in range(n) if i != j and counts[j] > 0]
        return float(np.mean(vals)) if vals else float("nan")


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(int(seed)))


def business_dates(n: int, start: str = START_DATE) -> tuple[str, ...]:
    return tuple(d.strftime("%Y-%m-%d") for d in pd.bdate_range(start, periods=n))


def generate(spec: SynthSpec) -> tuple[IndexPanel, GroundTruth]:
    rng = _rng(spec.seed)
    n, T = spec.n_markets, spec.n_days
    vol, q = spec.vol, spec.q
    kappa = spec.co_jump_by_day()
    rates = {k: systemic_rate(q, k) for k in np.unique(kappa)}
    pi = np.array([rates[k] for k in kappa])
    idio = np.clip((q[None, :] - pi[:, None]) / (1.0 - pi[:, None]), 0.0, 1.0)

    systemic = rng.random(T) < pi
    own = rng.random((T, n)) < idio
    jumps = np.where(systemic[:, None], True, own)
    jumps[:2] = False

    c = spec.noise_clip
    scale = stats.truncnorm.std(-c, c)
    u = rng.random((T, n))
    lo, hi = spec.jump_size
    size = rng.uniform(lo, hi, size=(T, n))
    common_sign = np.where(rng.random(T) < 0.5, -1.0, 1.0)
    own_sign = np.where(rng.random((T, n)) < 0.5, -1.0, 1.0)
    sign = np.where(systemic[:, None], common_sign[:, None], own_sign)
    jump_diff = sign * size * vol[None, :]

    # Return differences: the jump draw on jump days, otherwise a normal truncated
    # to +-noise_clip (rescaled to unit variance). Mean reversion of the returns
    # shifts the centre of that normal, never its bounds, so noise stays inside
    # the band. Sampling is by inverse CDF.
    y = np.zeros((T, n))
    for t in range(1, T):
        m = np.clip(-spec.reversion * y[t - 1] * scale / vol, -0.9 * c, 0.9 * c)
        pa, pb = special.ndtr(-c - m), special.ndtr(c - m)
        v = m + special.ndtri(pa + u[t] * (pb - pa))
        y[t] = y[t - 1] + np.where(jumps[t], jump_diff[t], v / scale * vol)
    # a constant offset stops levels drifting
    r = y[1:] + 0.5 * np.mean(y[1:] ** 2, axis=0)
    levels = np.empty((T, n))
    levels[0] = spec.start_level
    levels[1:] = spec.start_level * np.cumprod(1.0 + r, axis=0)

    dates = business_dates(T)
    markets = spec.market_names
    panel = IndexPanel(dates, markets, levels)
    truth = GroundTruth(
        dates=dates[2:],
        markets=markets,
        jumps=jumps[2:].astype(np.int8),
        systemic=systemic[2:],
        co_jump_target=kappa[2:],
        regimes=spec.regimes,
    )
    return panel, truth


def write_truth_csv(truth: GroundTruth, path) -> None:
    frame = pd.DataFrame(truth.jumps, index=list(truth.dates), columns=list(truth.markets))
    frame.insert(0, "co_jump_target", truth.co_jump_target)
    frame.insert(0, "systemic", truth.systemic.astype(int))
    frame.index.name = "date"
    frame.to_csv(path, lineterminator="\n")
