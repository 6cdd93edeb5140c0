"""Subchannel allocation for multi-platoon groupcast and unicast links that share spectrum with cellular users."""

from .channel import ChannelConfig, ChannelGains
from .errors import (
    ConfigError,
    ConstraintError,
    CoverageError,
    DomainError,
    InfeasibleError,
    InvariantError,
    PartitionInfeasible,
    PlatoonShareError,
    ResourceExhaustedError,
    UsageError,
)
from .harness import ExperimentPlan, run_method, run_sweep
from .linkmodel import Allocation, LinkBudgetParams, validate_allocation
from .metrics import MetricsReport, compute_metrics
from .rspu import run_rspu
from .scenario import ScenarioConfig, build_scenario
from .tmpg import MatchTriple, run_tmpg

__version__ = "0.1.0"
