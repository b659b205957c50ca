"""Routing and scheduling policies.

The module-level functions are pure decisions over a ``SystemState``; the
``Policy`` classes bundle them with parameters, rate knowledge and a random
stream so the engine can drive them slot by slot.

Tie rules: weighted-workload routing prefers the smallest weighted workload,
then the fastest (estimated) server, then the smallest server index.  Max-Weight
and c-mu scheduling break ties on the smallest type index.
"""
from __future__ import annotations

from enum import Enum
from typing import NamedTuple, Sequence

from .estimation import (ExplorationSchedule, RateEstimates, estimated_workload, record_service,
                         should_explore)
from .model import LocalityStructure, RateMatrix, SystemState, workload

DEFAULT_CMU_EXPONENT = 1.01


class Architecture(str, Enum):
    SUBQUEUE = "subqueue"  # per-server sub-queues, tasks routed on arrival
    CENTRAL = "central"  # one queue per task type
    SINGLE = "single"  # one FIFO queue


class PolicyKind(str, Enum):
    GB_PANDAS = "GBPandas"
    BLIND_GB_PANDAS = "BlindGBPandas"
    MAX_WEIGHT = "MaxWeight"
    BLIND_MAX_WEIGHT = "BlindMaxWeight"
    CMU_RULE = "CMuRule"
    BLIND_CMU_RULE = "BlindCMuRule"
    FCFS = "FCFS"

    @property
    def blind(self) -> bool:
        return self.value.startswith("Blind")

    @property
    def architecture(self) -> Architecture:
        if self in (PolicyKind.GB_PANDAS, PolicyKind.BLIND_GB_PANDAS):
            return Architecture.SUBQUEUE
        if self is PolicyKind.FCFS:
            return Architecture.SINGLE
        return Architecture.CENTRAL


class RoutingDecision(NamedTuple):
    server: int
    level: int


class SchedulingDecision(NamedTuple):
    """What an idle server takes next: a sub-queue level, a task type, the FIFO head, or nothing."""

    kind: str  # "level" | "type" | "head" | "idle"
    index: int | None = None

    @property
    def is_idle(self) -> bool:
        return self.kind == "idle"


IDLE_DECISION = SchedulingDecision("idle")
HEAD_DECISION = SchedulingDecision("head")


def _route_argmin(workloads: Sequence[float], rates: Sequence[float]) -> int:
    best = 0
    best_score, best_rate = workloads[0] / rates[0], rates[0]
    for m in range(1, len(rates)):
        score = workloads[m] / rates[m]
        if score < best_score or (score == best_score and rates[m] > best_rate):
            best, best_score, best_rate = m, score, rates[m]
    return best


def gb_pandas_route(state: SystemState, L: LocalityStructure, B: RateMatrix, i: int) -> RoutingDecision:
    M = L.n_servers
    W = [workload(state, L, m) for m in range(M)]
    m = _route_argmin(W, [float(B.values[i, k]) for k in range(M)])
    return RoutingDecision(m, L.level_of[i][m])


def blind_gb_pandas_route(state: SystemState, L: LocalityStructure, est: RateEstimates,
                          sched: ExplorationSchedule, i: int, t: int, rng) -> RoutingDecision:
    M = L.n_servers
    if should_explore(sched, t, rng):
        m = min(int(rng.random() * M), M - 1)
    else:
        W = [estimated_workload(state, est, k) for k in range(M)]
        m = _route_argmin(W, [est.alpha_hat[k][L.level_of[i][k]] for k in range(M)])
    # levels come from the known locality structure; only the rates are estimated
    return RoutingDecision(m, L.level_of[i][m])


def priority_schedule(state: SystemState, m: int) -> SchedulingDecision:
    for n, q in enumerate(state.sub_queues[m]):
        if q:
            return SchedulingDecision("level", n)
    return IDLE_DECISION


def blind_schedule(state: SystemState, m: int, sched: ExplorationSchedule, t: int, rng) -> SchedulingDecision:
    nonempty = [n for n, q in enumerate(state.sub_queues[m]) if q]
    if not nonempty:
        return IDLE_DECISION
    if should_explore(sched, t, rng):
        k = min(int(rng.random() * len(nonempty)), len(nonempty) - 1)
        return SchedulingDecision("level", nonempty[k])
    return SchedulingDecision("level", nonempty[0])


def _argmax_type(scores: Sequence[float | None]) -> SchedulingDecision:
    best, best_score = None, None
    for i, s in enumerate(scores):
        if s is not None and (best_score is None or s > best_score):
            best, best_score = i, s
    return IDLE_DECISION if best is None else SchedulingDecision("type", best)


def max_weight_schedule(state: SystemState, rates, m: int) -> SchedulingDecision:
    """``rates[i][m]`` may be the true matrix or the estimated one."""
    return _argmax_type([rates[i][m] * len(q) if q else None
                         for i, q in enumerate(state.central_queues)])


def cmu_schedule(state: SystemState, rates, m: int, exponent: float = DEFAULT_CMU_EXPONENT) -> SchedulingDecision:
    """c-mu rule for costs ``C(Q) = Q ** exponent``; empty queues are not candidates."""
    if exponent <= 1:
        raise ValueError(f"cost exponent must exceed 1 for a strictly convex cost, got {exponent}")
    return _argmax_type([rates[i][m] * exponent * len(q) ** (exponent - 1) if q else None
                         for i, q in enumerate(state.central_queues)])


def explore_central(state: SystemState, rng) -> SchedulingDecision:
    nonempty = [i for i, q in enumerate(state.central_queues) if q]
    if not nonempty:
        return IDLE_DECISION
    k = min(int(rng.random() * len(nonempty)), len(nonempty) - 1)
    return SchedulingDecision("type", nonempty[k])


def fcfs_assign(state: SystemState, m: int) -> SchedulingDecision:
    return HEAD_DECISION if state.fcfs_queue else IDLE_DECISION


class Policy:
    """A routing/scheduling policy bound to one system and one random stream."""

    kind: PolicyKind

    def __init__(self, L: LocalityStructure, rng=None):
        self.L = L
        self.rng = rng
        self.estimates: RateEstimates | None = None

    @property
    def architecture(self) -> Architecture:
        return self.kind.architecture

    @property
    def name(self) -> str:
        return self.kind.value

    def route(self, state: SystemState, i: int, t: int) -> RoutingDecision:
        raise NotImplementedError(f"{self.name} keeps tasks in central queues")

    def schedule(self, state: SystemState, m: int, t: int) -> SchedulingDecision:
        raise NotImplementedError

    def observe(self, m: int, n: int, duration: int) -> None:
        if self.estimates is not None:
            record_service(self.estimates, m, n, duration)


def _fast_route(queues, alphas, level_of_i) -> int:
    # same arithmetic and tie rules as _route_argmin over (estimated) workloads
    best = -1
    best_score = best_rate = 0.0
    for m, (qs, al) in enumerate(zip(queues, alphas)):
        w = 0.0
        for q, a in zip(qs, al):
            if q:
                w += len(q) / a
        r = al[level_of_i[m]]
        score = w / r
        if best < 0 or score < best_score or (score == best_score and r > best_rate):
            best, best_score, best_rate = m, score, r
    return best


class _Exploring:
    """Caches the exploration probability of the current slot."""

    exploration: ExplorationSchedule
    rng = None
    _slot = 0
    _p = 0.0

    def explore(self, t: int) -> bool:
        if t != self._slot:
            if t < 1:
                raise ValueError("slots are numbered from 1")
            self._slot, self._p = t, self.exploration.probability(t)
        p = self._p
        return p > 0.0 and self.rng.random() < p


class GBPandas(Policy):
    kind = PolicyKind.GB_PANDAS

    def __init__(self, L, B: RateMatrix, rng=None):
        super().__init__(L, rng)
        self.B = B

    def route(self, state, i, t):
        L = self.L
        m = _fast_route(state.sub_queues, L.distinct_rates, L.level_of[i])
        return RoutingDecision(m, L.level_of[i][m])

    def schedule(self, state, m, t):
        return priority_schedule(state, m)


class BlindGBPandas(_Exploring, Policy):
    kind = PolicyKind.BLIND_GB_PANDAS

    def __init__(self, L, estimates: RateEstimates, exploration: ExplorationSchedule, rng):
        super().__init__(L, rng)
        self.estimates = estimates
        self.exploration = exploration

    def route(self, state, i, t):
        L = self.L
        M = L.n_servers
        if self.explore(t):
            m = min(int(self.rng.random() * M), M - 1)
        else:
            m = _fast_route(state.sub_queues, self.estimates.alpha_hat, L.level_of[i])
        return RoutingDecision(m, L.level_of[i][m])

    def schedule(self, state, m, t):
        queues = state.sub_queues[m]
        for first, q in enumerate(queues):
            if q:
                break
        else:
            return IDLE_DECISION
        if self.explore(t):
            nonempty = [n for n, q in enumerate(queues) if q]
            k = min(int(self.rng.random() * len(nonempty)), len(nonempty) - 1)
            return SchedulingDecision("level", nonempty[k])
        return SchedulingDecision("level", first)

    def observe(self, m, n, duration):
        # inlined record_service
        if duration < 1:
            raise ValueError(f"observed service time must be >= 1 slot, got {duration}")
        est = self.estimates
        k = est.counts[m][n] + 1
        est.alpha_hat[m][n] = (k - 1) / k * est.alpha_hat[m][n] + 1.0 / (k * duration)
        est.counts[m][n] = k


class MaxWeight(Policy):
    kind = PolicyKind.MAX_WEIGHT

    def __init__(self, L, B: RateMatrix, rng=None):
        super().__init__(L, rng)
        self.rates = B.values.tolist()

    def _rates(self):
        return self.rates

    def _decide(self, state, m):
        return max_weight_schedule(state, self._rates(), m)

    def schedule(self, state, m, t):
        return self._decide(state, m)


class BlindMaxWeight(_Exploring, MaxWeight):
    kind = PolicyKind.BLIND_MAX_WEIGHT

    def __init__(self, L, estimates: RateEstimates, exploration: ExplorationSchedule, rng):
        Policy.__init__(self, L, rng)
        self.estimates = estimates
        self.exploration = exploration

    def _rates(self):
        return self.estimates.rate_matrix(self.L)

    def _score(self, rate, length):
        return rate * length

    def _decide(self, state, m):
        # column-only version of the reference decision, identical arithmetic
        alpha = self.estimates.alpha_hat[m]
        levels = self.L.level_of
        best, best_score = None, None
        for i, q in enumerate(state.central_queues):
            if q:
                score = self._score(alpha[levels[i][m]], len(q))
                if best_score is None or score > best_score:
                    best, best_score = i, score
        return IDLE_DECISION if best is None else SchedulingDecision("type", best)

    def schedule(self, state, m, t):
        if not any(state.central_queues):
            return IDLE_DECISION
        if self.explore(t):
            return explore_central(state, self.rng)
        return self._decide(state, m)


class CMuRule(MaxWeight):
    kind = PolicyKind.CMU_RULE

    def __init__(self, L, B: RateMatrix, rng=None, exponent: float = DEFAULT_CMU_EXPONENT):
        super().__init__(L, B, rng)
        if exponent <= 1:
            raise ValueError("cost exponent must exceed 1")
        self.exponent = exponent

    def _decide(self, state, m):
        return cmu_schedule(state, self._rates(), m, self.exponent)


class BlindCMuRule(BlindMaxWeight):
    kind = PolicyKind.BLIND_CMU_RULE

    def __init__(self, L, estimates, exploration, rng, exponent: float = DEFAULT_CMU_EXPONENT):
        super().__init__(L, estimates, exploration, rng)
        if exponent <= 1:
            raise ValueError("cost exponent must exceed 1")
        self.exponent = exponent

    def _score(self, rate, length):
        return rate * self.exponent * length ** (self.exponent - 1)


class FCFS(Policy):
    kind = PolicyKind.FCFS

    def schedule(self, state, m, t):
        return fcfs_assign(state, m)


def make_policy(kind: PolicyKind | str, B: RateMatrix, L: LocalityStructure, *,
                rng=None, estimates: RateEstimates | None = None,
                exploration: ExplorationSchedule | None = None,
                exponent: float = DEFAULT_CMU_EXPONENT) -> Policy:
    kind = PolicyKind(kind)
    if kind.blind and (estimates is None or rng is None):
        raise ValueError(f"{kind.value} needs initial estimates and a random stream")
    exploration = exploration or ExplorationSchedule()
    if kind is PolicyKind.GB_PANDAS:
        return GBPandas(L, B, rng)
    if kind is PolicyKind.BLIND_GB_PANDAS:
        return BlindGBPandas(L, estimates, exploration, rng)
    if kind is PolicyKind.MAX_WEIGHT:
        return MaxWeight(L, B, rng)
    if kind is PolicyKind.BLIND_MAX_WEIGHT:
        return BlindMaxWeight(L, estimates, exploration, rng)
    if kind is PolicyKind.CMU_RULE:
        return CMuRule(L, B, rng, exponent)
    if kind is PolicyKind.BLIND_CMU_RULE:
        return BlindCMuRule(L, estimates, exploration, rng, exponent)
    return FCFS(L, rng)
