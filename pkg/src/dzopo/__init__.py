"""Distributed zeroth-order policy optimization for cooperative multi-agent
reinforcement learning under partial observations."""

from .environment import EnvParams
from .estimators import EstimatorKind
from .graph import (
    CommGraph,
    MixingMatrix,
    build_chain,
    build_complete,
    build_grid,
    consensus_round,
    consensus_rounds,
    metropolis_weights,
    uniform_weights,
)
from .optimizer import (
    DistributedPolicyOptimizer,
    OptimizerConfig,
    ScheduleInputs,
    schedule_with_tracking,
    schedule_without_tracking,
    stepsize,
)
from .policy import FeatureBasis, JointPolicy

__version__ = "0.1.0"

__all__ = [
    "CommGraph",
    "MixingMatrix",
    "build_chain",
    "build_grid",
    "build_complete",
    "metropolis_weights",
    "uniform_weights",
    "consensus_round",
    "consensus_rounds",
    "EnvParams",
    "EstimatorKind",
    "FeatureBasis",
    "JointPolicy",
    "DistributedPolicyOptimizer",
    "OptimizerConfig",
    "ScheduleInputs",
    "schedule_without_tracking",
    "schedule_with_tracking",
    "stepsize",
]
