"""UAV placement on channel knowledge maps with a derivative-free trust-region method."""

from .baselines import SearchGrid, exhaustive_search, hovering_placement, los_design, los_gain
from .ckm import GridCkm, generate_synthetic_ckm, load_ckm, lookup_gain, save_ckm
from .config import parse_config
from .dfo import TrustRegion, build_model, maximize
from .dfo import run as optimize_placement
from .errors import (
    BudgetExceededError,
    CkmError,
    ConfigError,
    DegenerateSetError,
    InfeasiblePlacementError,
    OutOfMapError,
)
from .experiment import run_experiment
from .geometry import Area, Building
from .network import NetworkScene, Placement, rate, sinr, weighted_sum_rate
from .trs import TrsProblem, solve_trs

__version__ = "0.1.0"

__all__ = [
    "Area",
    "Building",
    "BudgetExceededError",
    "CkmError",
    "ConfigError",
    "DegenerateSetError",
    "GridCkm",
    "InfeasiblePlacementError",
    "NetworkScene",
    "OutOfMapError",
    "Placement",
    "SearchGrid",
    "TrsProblem",
    "TrustRegion",
    "build_model",
    "exhaustive_search",
    "generate_synthetic_ckm",
    "hovering_placement",
    "load_ckm",
    "los_design",
    "los_gain",
    "lookup_gain",
    "maximize",
    "optimize_placement",
    "parse_config",
    "rate",
    "run_experiment",
    "save_ckm",
    "sinr",
    "solve_trs",
    "weighted_sum_rate",
]
