"""Discrete-time simulation of affinity scheduling with unknown service rates.

Tasks of several types arrive to a cluster whose per-(type, server) service
rates are fixed but, for the blind policies, unknown.  The package provides
the locality model, a capacity LP, rate estimation with decaying exploration,
the routing/scheduling policies, a slot engine with runtime invariant checks,
and an experiment CLI.
"""
__version__ = "0.1.0"

from .capacity import Decomposition, feasible_decomposition, max_scalar_throughput, min_max_load
from .estimation import ExplorationSchedule, RateEstimates, init_estimates, record_service
from .model import LocalityStructure, RateMatrix, SystemState, Task, build_locality_structure, workload
from .policies import PolicyKind, make_policy
from .sim import Engine, EngineConfig, MetricsReport, PolicySpec, build_engine, run
from .workloads import ArrivalSpec, ServiceSpec

__all__ = [
    "ArrivalSpec", "Decomposition", "Engine", "EngineConfig", "ExplorationSchedule",
    "LocalityStructure", "MetricsReport", "PolicyKind", "PolicySpec", "RateEstimates",
    "RateMatrix", "ServiceSpec", "SystemState", "Task", "build_engine", "build_locality_structure",
    "feasible_decomposition", "init_estimates", "make_policy", "max_scalar_throughput",
    "min_max_load", "record_service", "run", "workload",
]
