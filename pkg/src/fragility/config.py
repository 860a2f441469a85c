"""Run configuration: defaults, validation, and key-value file loading."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any

import yaml

from .errors import ConfigError

BASES = ("diff", "return")
RETURN_KINDS = ("simple", "log")
W_KINDS = ("probability", "flow", "inverse_distance")
U_DENOMINATORS = ("outflow", "inflow")
FD_MODES = ("substitution", "entrywise")
SWEEP_AXES = ("basis", "time_shift", "cutoff", "window")


@dataclass(frozen=True)
class IngestConfig:
    time_shift: int = 1
    max_ffill_days: int = 5
    missing_row_frac: float = 0.2
    return_kind: str = "simple"

    def __post_init__(self):
        _check_int("time_shift", self.time_shift, lo=1)
        _check_int("max_ffill_days", self.max_ffill_days, lo=0)
        if not 0.0 <= self.missing_row_frac <= 1.0:
            raise ConfigError(f"missing_row_frac must lie in [0, 1], got {self.missing_row_frac}")
        _check_choice("return_kind", self.return_kind, RETURN_KINDS)


@dataclass(frozen=True)
class RunConfig:
    """Every tunable of the pipeline.

    Defaults follow the daily set-up: one-day time shift, cutoff 2,
    120-day windows, constant returns to scale in the flow formula.
    """

    input: str | None = None
    out: str | None = None
    # ingest
    time_shift: int = 1
    max_ffill_days: int = 5
    missing_row_frac: float = 0.2
    return_kind: str = "simple"
    # jumps
    cutoff: float = 2.0
    basis: str = "diff"
    min_obs: int = 30
    # network
    exponents: tuple[float, float, float] = (1.0, 1.0, 2.0)
    total_flow_double: bool = False
    # transmission
    w_kind: str = "probability"
    u_denominator: str = "inflow"
    eig_tol: float = 1e-10
    eig_max_iter: int = 10_000
    # decomposition
    fd_mode: str = "substitution"
    h_rel: float = 1e-6
    # rolling
    window: int = 120
    stride: int = 1
    threshold: float = 1.0
    min_run: int = 10
    contributions: bool = True
    # robustness
    sweep_axis: str = "cutoff"
    sweep_values: tuple | None = None
    sweep_time_shift_stride: int = 1
    # execution
    jobs: int = 1
    seed: int = 0

    def __post_init__(self):
        _check_int("time_shift", self.time_shift, lo=1)
        _check_int("max_ffill_days", self.max_ffill_days, lo=0)
        if not 0.0 <= self.missing_row_frac <= 1.0:
            raise ConfigError(f"missing_row_frac must lie in [0, 1], got {self.missing_row_frac}")
        _check_choice("return_kind", self.return_kind, RETURN_KINDS)
        if not self.cutoff > 0:
            raise ConfigError(f"cutoff must be positive, got {self.cutoff}")
        _check_choice("basis", self.basis, BASES)
        _check_int("min_obs", self.min_obs, lo=1)
        exps = tuple(float(x) for x in self.exponents)
        if len(exps) != 3:
            raise ConfigError("exponents must have three entries (alpha, beta, gamma)")
        if any(x < 0 for x in exps):
            raise ConfigError(f"exponents must be non-negative, got {exps}")
        object.__setattr__(self, "exponents", exps)
        _check_choice("w_kind", self.w_kind, W_KINDS)
        _check_choice("u_denominator", self.u_denominator, U_DENOMINATORS)
        if not self.eig_tol > 0:
            raise ConfigError("eig_tol must be positive")
        _check_int("eig_max_iter", self.eig_max_iter, lo=1)
        _check_choice("fd_mode", self.fd_mode, FD_MODES)
        if not self.h_rel > 0:
            raise ConfigError(f"h_rel must be positive, got {self.h_rel}")
        _check_int("window", self.window, lo=30)
        _check_int("stride", self.stride, lo=1)
        if not self.threshold > 0:
            raise ConfigError("threshold must be positive")
        _check_int("min_run", self.min_run, lo=1)
        _check_choice("sweep_axis", self.sweep_axis, SWEEP_AXES)
        if self.sweep_values is not None:
            object.__setattr__(self, "sweep_values", tuple(self.sweep_values))
        _check_int("sweep_time_shift_stride", self.sweep_time_shift_stride, lo=1)
        _check_int("jobs", self.jobs, lo=1)
        _check_int("seed", self.seed, lo=0)

    @property
    def ingest(self) -> IngestConfig:
        return IngestConfig(
            time_shift=self.time_shift,
            max_ffill_days=self.max_ffill_days,
            missing_row_frac=self.missing_row_frac,
            return_kind=self.return_kind,
        )

    def replace(self, **changes) -> "RunConfig":
        unknown = set(changes) - {f.name for f in fields(self)}
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict[str, Any]:
        out = dataclasses.asdict(self)
        out["exponents"] = list(self.exponents)
        if self.sweep_values is not None:
            out["sweep_values"] = list(self.sweep_values)
        return out


def _check_int(name, value, lo=None):
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{name} must be an integer, got {value!r}")
    if lo is not None and value < lo:
        raise ConfigError(f"{name} must be >= {lo}, got {value}")


def _check_choice(name, value, choices):
    if value not in choices:
        raise ConfigError(f"{name} must be one of {choices}, got {value!r}")


def parse_value(text: str) -> Any:
    """Parse a scalar override such as ``cutoff=2.1`` using YAML scalar rules."""
    try:
        return yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse value {text!r}: {exc}") from exc


def load_config(path: str | Path | None = None, overrides: dict[str, Any] | None = None) -> RunConfig:
    """Read a YAML key-value file, apply overrides, and validate.

    Unknown keys are rejected rather than ignored.
    """
    data: dict[str, Any] = {}
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file not found: {p}")
        try:
            loaded = yaml.safe_load(p.read_text())
        except yaml.YAMLError as exc:
            raise ConfigError(f"malformed config file {p}: {exc}") from exc
        if loaded is None:
            loaded = {}
        if not isinstance(loaded, dict):
            raise ConfigError(f"config file {p} must hold a mapping of keys to values")
        data.update(loaded)
    if overrides:
        data.update({k: v for k, v in overrides.items() if v is not None})
    known = {f.name for f in fields(RunConfig)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"unknown config keys: {unknown}")
    try:
        return RunConfig(**data)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
