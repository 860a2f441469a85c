"""Systemic-fragility indicator built from co-jump networks of index returns."""

from .config import RunConfig, load_config
from .errors import ConfigError, DataError, FragilityError, NumericalError
from .ingest import IndexPanel, ReturnPanel, compute_returns, load_index_csv
from .jumps import JumpPanel, JumpStats, standardize
from .network import FlowNetwork, build_network, conditional_probability, flows, masses, total_flow
from .shock import TransmissionModel, build_model, largest_eigenvalue, simulate_shock
from .decomposition import ContributionTriple, contributions
from .rolling import InstabilityPeriod, StabilitySeries, run, segment_instability
from .pipeline import Analysis, analyze, snapshot
from .robustness import SweepResult, normality_diagnostics, sweep
from .synth import GroundTruth, SynthSpec, generate

__version__ = "0.1.0"

__all__ = [
    "Analysis", "ConfigError", "ContributionTriple", "DataError", "FlowNetwork", "FragilityError",
    "GroundTruth", "IndexPanel", "InstabilityPeriod", "JumpPanel", "JumpStats", "NumericalError",
    "ReturnPanel", "RunConfig", "StabilitySeries", "SweepResult", "SynthSpec", "TransmissionModel",
    "analyze", "build_model", "build_network", "compute_returns", "conditional_probability",
    "contributions", "flows", "generate", "largest_eigenvalue", "load_config", "load_index_csv",
    "masses", "normality_diagnostics", "run", "segment_instability", "simulate_shock", "snapshot",
    "standardize", "sweep", "total_flow",
]
