"""Built-in self-check suite behind ``affinity-sim validate``.

Each check is named and reported PASS or FAIL.  The runtime identities are
exercised by short simulations of every policy on the three-server scenario;
``fault`` is forwarded to the engine so the suite can be shown to catch a
broken queue update.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .capacity import max_scalar_throughput
from .estimation import RateEstimates, record_service
from .model import RateMatrix, build_locality_structure
from .policies import PolicyKind
from .sim import EngineConfig, PolicySpec, build_engine
from .workloads import ArrivalSpec, ServiceSpec, service_batch

DEMO_RATES = ((1.0, 1.0, 1.0), (0.5, 0.5, 1.0), (0.25, 0.5, 1.0))
DEMO_PROPORTIONS = (0.4, 0.2, 0.4)

# invariant name -> prefix of the engine's violation message
INVARIANTS = {
    "psi zero iff server idle": "psi/idle",
    "no preemption": "in-service task preempted",
    "task conservation": "conservation",
    "per-type conservation": "type ",
    "arrival aggregation": "aggregation",
    "per-queue length update": "queue update",
    "workload/unused-service orthogonality": "orthogonality",
    "workload recursion": "workload recursion",
}


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str = ""

    def line(self) -> str:
        tail = f"  ({self.detail})" if self.detail else ""
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name}{tail}"


def _capacity() -> CheckResult:
    lam = max_scalar_throughput(RateMatrix(DEMO_RATES), DEMO_PROPORTIONS)
    return CheckResult("capacity LP boundary", abs(lam - 2.5) < 1e-5, f"lambda*={lam:.7f}")


def _locality() -> CheckResult:
    L = build_locality_structure(RateMatrix(DEMO_RATES))
    ok = (L.distinct_rates == ((1.0, 0.5, 0.25), (1.0, 0.5), (1.0,))
          and L.locality_sets[0] == ({0}, {1}, {2}) and L.locality_sets[2] == ({0, 1, 2},))
    return CheckResult("locality levels", ok)


def _estimator() -> CheckResult:
    rng = np.random.default_rng(0)
    obs = rng.integers(1, 50, size=500)
    est = RateEstimates.from_values([[0.3]])
    for T in obs:
        record_service(est, 0, 0, int(T))
    target = float(np.mean(1.0 / obs))
    err = abs(est.alpha_hat[0][0] - target)
    return CheckResult("estimator is running mean of 1/T", err < 1e-12, f"err={err:.1e}")


def _service_bounds() -> CheckResult:
    rng = np.random.default_rng(1)
    bad = 0
    for kind in ("deterministic", "geometric", "lognormal"):
        spec = ServiceSpec(kind, sigma=0.5, s_max=200)
        for a in (1.0, 0.5, 0.25):
            x = service_batch(spec, a, 5000, rng)
            bad += int(np.sum((x < 1) | (x > spec.s_max) | (x != np.floor(x))))
    return CheckResult("service samples are integers in [1, s_max]", bad == 0, f"{bad} bad")


def _runtime_checks(fault: str | None, horizon: int) -> list[CheckResult]:
    B = RateMatrix(DEMO_RATES)
    arrivals = ArrivalSpec(tuple(2.4 * p for p in DEMO_PROPORTIONS))
    service = ServiceSpec("geometric")
    hits = {name: 0 for name in INVARIANTS}
    slots = 0
    for k, kind in enumerate(PolicyKind):
        cfg = EngineConfig(horizon=horizon, seed=100 + k, abort_on_violation=False, fault=fault)
        engine = build_engine(B, PolicySpec(kind), arrivals, service, cfg, lam=2.4)
        engine.run()
        slots += horizon
        for _, msg in engine.violations:
            for name, prefix in INVARIANTS.items():
                if msg.startswith(prefix):
                    hits[name] += 1
                    break
    return [CheckResult(f"invariant: {name}", n == 0, f"{n} violations over {slots} slots")
            for name, n in hits.items()]


def _determinism(horizon: int) -> CheckResult:
    B = RateMatrix(DEMO_RATES)
    arrivals = ArrivalSpec(tuple(2.0 * p for p in DEMO_PROPORTIONS))
    cfg = EngineConfig(horizon=horizon, seed=5, invariant_checks=False)
    spec = PolicySpec(PolicyKind.BLIND_GB_PANDAS)
    a = build_engine(B, spec, arrivals, ServiceSpec(), cfg).run()
    b = build_engine(B, spec, arrivals, ServiceSpec(), cfg).run()
    same = (a.mean_completion_time == b.mean_completion_time and a.backlog == b.backlog
            and a.final_estimates == b.final_estimates)
    return CheckResult("same seed reproduces the run", same)


def run_checks(fault: str | None = None, horizon: int = 3000) -> list[CheckResult]:
    checks: list[Callable[[], CheckResult | list[CheckResult]]] = [
        _capacity, _locality, _estimator, _service_bounds,
        lambda: _runtime_checks(fault, horizon), lambda: _determinism(horizon),
    ]
    out: list[CheckResult] = []
    for check in checks:
        res = check()
        out.extend(res if isinstance(res, list) else [res])
    return out


def all_passed(results: list[CheckResult]) -> bool:
    return all(r.passed for r in results)
