"""Experiment drivers shared by the CLI and the acceptance tests."""
from __future__ import annotations

import os
from dataclasses import dataclass

from .estimation import ExplorationSchedule
from .model import RateMatrix
from .policies import PolicyKind
from .report import ReportRow
from .scenario import Scenario
from .sim import EngineConfig, PolicySpec, RunSummary, run
from .workloads import ArrivalSpec, ServiceSpec


def worker_count() -> int:
    try:
        cap = int(os.environ.get("AFFINITY_SIM_THREADS", "1"))
    except ValueError:
        cap = 1
    return max(1, min(cap, os.cpu_count() or 1))


def sweep(scenario: Scenario, seed: int | None = None, invariant_checks: bool | None = None,
          workers: int = 1) -> list[RunSummary]:
    """Every (policy, lambda) pair of the scenario, in config order."""
    B = scenario.rate_matrix()
    service = scenario.service_spec()
    config = scenario.engine_config()
    if seed is not None:
        config.seed = seed
    if invariant_checks is not None:
        config.invariant_checks = invariant_checks
    out = []
    for spec in scenario.policy_specs():
        for lam in scenario.lambdas:
            out.append(run(B, spec, scenario.arrival_spec(lam), service, config,
                           scenario.replications, lam=lam, workers=workers))
    return out


def report_rows(summaries: list[RunSummary]) -> list[ReportRow]:
    return [ReportRow.from_metrics(r) for s in summaries for r in s.reports]


# Two servers, two types; each server is twice as fast on its own type.
# Reconstructed from the stability thresholds alone; the exact rates are an assumption.
COUNTEREXAMPLE_RATES = ((1.0, 0.5), (0.5, 1.0))
# Per (server, level): every server starts out believing its native type is the slow one.
ADVERSARIAL_ESTIMATES = ((0.25, 1.0), (0.25, 1.0))


@dataclass
class CounterexampleRun:
    label: str
    explore: bool
    lam: float
    summary: RunSummary

    @property
    def mean_completion_time(self) -> float:
        return self.summary.mean_completion_time[0]

    @property
    def backlog_slope(self) -> float:
        return self.summary.backlog_slope[0]


def counterexample(lams=(0.4, 0.7), horizon: int = 20_000, warmup: int = 2_000, seed: int = 1,
                   c: float = 0.5, invariant_checks: bool = True) -> list[CounterexampleRun]:
    """Blind GB-PANDAS with and without exploration from a misleading initial estimate."""
    B = RateMatrix(COUNTEREXAMPLE_RATES)
    service = ServiceSpec("deterministic")
    config = EngineConfig(horizon=horizon, warmup=warmup, seed=seed, invariant_checks=invariant_checks)
    out = []
    for lam in lams:
        arrivals = ArrivalSpec((lam, lam), "deterministic")
        for explore in (False, True):
            sched = ExplorationSchedule(c=c, enabled=explore)
            spec = PolicySpec(PolicyKind.BLIND_GB_PANDAS, exploration=sched,
                              initial_estimates=[list(r) for r in ADVERSARIAL_ESTIMATES])
            label = f"{'exploration' if explore else 'no exploration'}, lambda_i={lam}"
            out.append(CounterexampleRun(label, explore, lam, run(B, spec, arrivals, service, config, 1, lam)))
    return out
