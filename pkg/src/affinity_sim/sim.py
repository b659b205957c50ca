"""Discrete-time slot engine, runtime invariant monitor and replication harness.

Each slot runs five phases in a fixed order:

1. release servers whose task finished at the end of the previous slot and
   hand the observed service time to the policy;
2. draw arrivals and route them (sub-queue architecture) or enqueue them;
3. let every idle server, in ascending index, pick its next task;
4. advance busy servers by one slot; tasks whose countdown hits zero complete
   in this slot;
5. emit a ``SlotTrace`` (only when checks or trace recording are enabled).

The sub-queue service count ``S[m][n]`` is 1 in the slot a task leaves
``Q[m][n]`` for service, so queue lengths obey
``Q(t+1) = Q(t) + A(t) - S(t) + U(t)`` exactly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .estimation import ExplorationSchedule, RateEstimates, init_estimates
from .model import IDLE, LocalityStructure, RateMatrix, SystemState, Task, build_locality_structure
from .policies import Architecture, Policy, PolicyKind, make_policy
from .workloads import ArrivalSpec, ArrivalStream, ServiceSpec, ServiceStream, UniformStream

INVARIANT_TOL = 1e-9
STABLE_SLOPE = 1e-3


class InvariantViolation(RuntimeError):
    def __init__(self, t: int, violations: list[str]):
        super().__init__(f"slot {t}: " + "; ".join(violations))
        self.t = t
        self.violations = violations


@dataclass
class EngineConfig:
    horizon: int
    warmup: int = 0
    seed: int = 0
    invariant_checks: bool = True
    sample_interval: int = 100
    abort_on_violation: bool = True
    record_trace: bool = False
    fault: str | None = None  # test hook: "duplicate_service" keeps dequeued tasks in the queue

    def __post_init__(self):
        if self.horizon < 0 or not (0 <= self.warmup and (self.warmup < self.horizon or self.horizon == 0)):
            raise ValueError("need 0 <= warmup < horizon")
        if self.sample_interval < 1:
            raise ValueError("sample_interval must be positive")


@dataclass
class QueueSnapshot:
    lengths: list[list[int]]
    eta: list[int]
    psi: list[int]
    busy: list[Task | None]  # in-service task per server


@dataclass
class SlotTrace:
    """Everything that happened in one slot; pseudo quantities are in workload units."""

    t: int
    arrivals: list[int]
    routed: list[list[int]]  # A[i][m]
    routed_sub: list[list[int]]  # A[m][n]
    services: list[list[int]]  # S[m][n]
    unused: list[int]  # U[m]
    workload: list[float]  # W(t)
    workload_next: list[float]  # W(t+1)
    pseudo_arrival: list[float]
    pseudo_service: list[float]
    pseudo_unused: list[float]
    in_system: int  # tasks counted in queues and on servers
    net_in_system: int  # arrived - completed so far


def derive_trace(t, arrivals, routed, routed_sub, services, before: QueueSnapshot,
                 after: QueueSnapshot, L: LocalityStructure, in_system: int, net_in_system: int) -> SlotTrace:
    unused, W, Wn, Ap, Sp, Up = [], [], [], [], [], []
    for alphas, qb, qa, rs, sv in zip(L.distinct_rates, before.lengths, after.lengths, routed_sub, services):
        w = wn = a_ = s_ = 0.0
        for a, x, y, r, v in zip(alphas, qb, qa, rs, sv):
            if x:
                w += x / a
            if y:
                wn += y / a
            if r:
                a_ += r / a
            if v:
                s_ += v / a
        u = sv[-1] - rs[-1] - qb[-1]
        u = u if u > 0 else 0
        unused.append(u)
        W.append(w)
        Wn.append(wn)
        Ap.append(a_)
        Sp.append(s_)
        Up.append(u / alphas[-1] if u else 0.0)
    return SlotTrace(t, list(arrivals), routed, routed_sub, services, unused, W, Wn, Ap, Sp, Up,
                     in_system, net_in_system)


def check_invariants(trace: SlotTrace, before: QueueSnapshot, after: QueueSnapshot,
                     L: LocalityStructure, architecture: Architecture = Architecture.SUBQUEUE) -> list[str]:
    """Per-slot identities; returns human-readable violations (empty when all hold).

    Checked: psi is zero exactly on idle servers at slot start, in-service tasks
    are never swapped out, tasks are conserved, and for the sub-queue
    architecture the per-level aggregation of routed arrivals, the per-queue
    length update, orthogonality of workload and unused service, and the
    workload recursion.
    """
    out = []
    m = 0
    for p, e, b, a in zip(before.psi, before.eta, before.busy, after.busy):
        if (p == 0) != (e == IDLE):
            out.append(f"psi/idle mismatch on server {m + 1}")
        if b is not None and a is not b:
            out.append(f"in-service task preempted on server {m + 1}")
        m += 1
    if trace.in_system != trace.net_in_system:
        out.append(f"conservation: {trace.in_system} in system vs {trace.net_in_system} arrived-completed")
    if architecture is not Architecture.SUBQUEUE:
        return out
    routed = trace.routed
    for m, (sets, qb, qa, rs, sv, u, w, wn, ap, sp, up) in enumerate(zip(
            L.locality_sets, before.lengths, after.lengths, trace.routed_sub, trace.services,
            trace.unused, trace.workload, trace.workload_next, trace.pseudo_arrival,
            trace.pseudo_service, trace.pseudo_unused)):
        last = len(sets) - 1
        for n, types in enumerate(sets):
            A = 0
            for i in types:
                A += routed[i][m]
            if A != rs[n]:
                out.append(f"aggregation A[{m + 1}][{n + 1}]: {rs[n]} != {A}")
            q_next = qb[n] + rs[n] - sv[n]
            if n == last:
                q_next += u
            if q_next < 0 or q_next != qa[n]:
                out.append(f"queue update Q[{m + 1}][{n + 1}]: {qa[n]} != {q_next}")
        if w * up != 0.0:
            out.append(f"orthogonality W*U on server {m + 1}")
        if abs(wn - (w + ap - sp + up)) > INVARIANT_TOL:
            out.append(f"workload recursion on server {m + 1}: {wn} != {w + ap - sp + up}")
    return out


@dataclass
class MetricsReport:
    policy: str
    lam: float
    replication: int
    seed: int
    horizon: int
    warmup: int
    mean_completion_time: float
    completed: int
    arrived: int
    in_system: int
    sample_times: list[int]
    backlog: list[int]
    backlog_slope: float
    final_estimates: list[list[float]] | None
    estimate_counts: list[list[int]] | None
    invariant_violations: int

    @property
    def stable(self) -> bool:
        return abs(self.backlog_slope) < STABLE_SLOPE


def backlog_slope(times, backlog) -> float:
    """Least-squares slope (tasks/slot) of the backlog over the final half of the run."""
    if not times:
        return 0.0
    t = np.asarray(times, dtype=float)
    y = np.asarray(backlog, dtype=float)
    keep = t >= t[-1] / 2
    if keep.sum() < 2:
        return 0.0
    return float(np.polyfit(t[keep], y[keep], 1)[0])


class Engine:
    """One replication of one policy on one system."""

    def __init__(self, B: RateMatrix, policy: Policy, arrivals: ArrivalSpec, service: ServiceSpec,
                 config: EngineConfig, arrival_rng: np.random.Generator,
                 service_rng: np.random.Generator, lam: float = math.nan, replication: int = 0):
        if len(arrivals.rates) != B.n_types:
            raise ValueError("arrival spec does not match the number of task types")
        self.B = B
        self.L = policy.L
        self.policy = policy
        self.config = config
        self.state = SystemState.empty(self.L)
        self.arrivals = ArrivalStream(arrivals, arrival_rng)
        self.services = ServiceStream(service, self.L.distinct_rates, service_rng)
        self.lam = lam
        self.replication = replication
        self._next_id = 0
        self.arrived = [0] * B.n_types
        self.completed = [0] * B.n_types
        self._ct_sum = 0
        self._ct_count = 0
        self.sample_times: list[int] = []
        self.backlog: list[int] = []
        self.violations: list[tuple[int, str]] = []
        self.trace: list[SlotTrace] = []
        self._in_system = 0
        self._n_levels = [self.L.n_levels(m) for m in range(B.n_servers)]

    def _snapshot(self) -> QueueSnapshot:
        s = self.state
        return QueueSnapshot([[len(q) for q in qs] for qs in s.sub_queues], s.eta[:], s.psi[:], s.in_service[:])

    def step(self) -> SlotTrace | None:
        s, L, policy = self.state, self.L, self.policy
        t = s.clock
        M = L.n_servers
        arch = policy.architecture
        in_service, remaining, eta, psi = s.in_service, s.remaining, s.eta, s.psi

        # phase 1: release servers that finished at the end of slot t-1
        for m in range(M):
            task = in_service[m]
            if task is not None and remaining[m] == 0:
                n = eta[m] if arch is Architecture.SUBQUEUE else L.level_of[task.type][m]
                policy.observe(m, n, psi[m])
                in_service[m] = None
                eta[m] = IDLE
                psi[m] = 0

        checking = self.config.invariant_checks or self.config.record_trace
        if checking:
            before = self._snapshot()
            routed = [[0] * M for _ in range(L.n_types)]
            routed_sub = [[0] * k for k in self._n_levels]
            services = [[0] * k for k in self._n_levels]

        # phase 2: arrivals
        counts = self.arrivals.counts(t)
        arrived = self.arrived
        for i, k in enumerate(counts):
            if not k:
                continue
            arrived[i] += k
            self._in_system += k
            if arch is Architecture.SUBQUEUE:
                sub_queues = s.sub_queues
                for _ in range(k):
                    d = policy.route(s, i, t)
                    sub_queues[d.server][d.level].append(Task(self._next_id, i, t))
                    self._next_id += 1
                    if checking:
                        routed[i][d.server] += 1
                        routed_sub[d.server][d.level] += 1
            else:
                q = s.central_queues[i] if arch is Architecture.CENTRAL else s.fcfs_queue
                for _ in range(k):
                    q.append(Task(self._next_id, i, t))
                    self._next_id += 1

        # phase 3: scheduling
        fault = self.config.fault
        for m in range(M):
            if in_service[m] is not None:
                continue
            d = policy.schedule(s, m, t)
            if d.kind == "idle":
                continue
            if d.kind == "level":
                n = d.index
                q = s.sub_queues[m][n]
                task = q[0] if fault == "duplicate_service" else q.popleft()
                if checking:
                    services[m][n] += 1
                eta[m] = n
            else:
                q = s.central_queues[d.index] if d.kind == "type" else s.fcfs_queue
                task = q.popleft()
                n = L.level_of[task.type][m]
                eta[m] = task.type
            in_service[m] = task
            remaining[m] = self.services.draw(m, n)
            psi[m] = 0

        # phase 4: progress
        for m in range(M):
            task = in_service[m]
            if task is None:
                continue
            psi[m] += 1
            remaining[m] -= 1
            if remaining[m] == 0:
                task.completion_slot = t
                self.completed[task.type] += 1
                self._in_system -= 1
                if t > self.config.warmup:
                    self._ct_sum += t - task.arrival_slot + 1
                    self._ct_count += 1

        if t % self.config.sample_interval == 0:
            self.sample_times.append(t)
            self.backlog.append(self._in_system)
        s.clock = t + 1

        if not checking:
            return None
        # phase 5: trace and monitor
        after = self._snapshot()
        if arch is Architecture.SUBQUEUE:
            trace = derive_trace(t, counts, routed, routed_sub, services, before, after, L,
                                 self._count_in_system(after), self._in_system)
        else:
            trace = SlotTrace(t, list(counts), routed, routed_sub, services, [], [], [], [], [], [],
                              self._count_in_system(after), self._in_system)
        if self.config.invariant_checks:
            problems = check_invariants(trace, before, after, L, arch)
            if problems:
                self.violations.extend((t, p) for p in problems)
                if self.config.abort_on_violation:
                    raise InvariantViolation(t, problems)
        if self.config.record_trace:
            self.trace.append(trace)
        return trace

    def _count_in_system(self, after: QueueSnapshot) -> int:
        s = self.state
        n = sum(map(sum, after.lengths)) + len(s.fcfs_queue)
        for q in s.central_queues:
            n += len(q)
        for task, r in zip(s.in_service, s.remaining):
            if task is not None and r > 0:
                n += 1
        return n

    def run(self) -> MetricsReport:
        for _ in range(self.config.horizon):
            self.step()
        self._check_type_conservation()
        est = self.policy.estimates
        return MetricsReport(
            policy=self.policy.name,
            lam=self.lam,
            replication=self.replication,
            seed=self.config.seed,
            horizon=self.config.horizon,
            warmup=self.config.warmup,
            mean_completion_time=self._ct_sum / self._ct_count if self._ct_count else math.nan,
            completed=sum(self.completed),
            arrived=sum(self.arrived),
            in_system=self._in_system,
            sample_times=self.sample_times,
            backlog=self.backlog,
            backlog_slope=backlog_slope(self.sample_times, self.backlog),
            final_estimates=None if est is None else [list(r) for r in est.alpha_hat],
            estimate_counts=None if est is None else [list(c) for c in est.counts],
            invariant_violations=len(self.violations),
        )

    def _check_type_conservation(self) -> None:
        if not self.config.invariant_checks:
            return
        s = self.state
        held = [0] * self.B.n_types
        for qs in s.sub_queues:
            for q in qs:
                for task in q:
                    held[task.type] += 1
        for q in (*s.central_queues, s.fcfs_queue):
            for task in q:
                held[task.type] += 1
        for m, task in enumerate(s.in_service):
            if task is not None and s.remaining[m] > 0:
                held[task.type] += 1
        for i in range(self.B.n_types):
            if self.arrived[i] != self.completed[i] + held[i]:
                msg = f"type {i + 1} conservation: arrived {self.arrived[i]} != completed + held"
                self.violations.append((s.clock, msg))
                if self.config.abort_on_violation:
                    raise InvariantViolation(s.clock, [msg])


@dataclass
class PolicySpec:
    """Policy choice plus the knobs a blind policy needs to start up."""

    kind: PolicyKind
    exponent: float = 1.01
    exploration: ExplorationSchedule = field(default_factory=ExplorationSchedule)
    init_low: float = 0.1
    init_high: float = 1.0
    initial_estimates: list[list[float]] | None = None  # per (server, level); random when None

    def __post_init__(self):
        self.kind = PolicyKind(self.kind)

    @property
    def label(self) -> str:
        return self.kind.value


def derive_seed(master: int, replication: int) -> int:
    """64-bit seed of one replication, a fixed function of (master seed, replication index)."""
    state = np.random.SeedSequence([int(master) % 2**64, replication]).generate_state(2, dtype=np.uint32)
    return int(state[0]) << 32 | int(state[1])


def build_engine(B: RateMatrix, spec: PolicySpec, arrivals: ArrivalSpec, service: ServiceSpec,
                 config: EngineConfig, lam: float = math.nan, replication: int = 0) -> Engine:
    """Wire an engine whose random streams all descend from ``config.seed``."""
    L = build_locality_structure(B)
    arr_ss, svc_ss, dec_ss, init_ss = np.random.SeedSequence(config.seed).spawn(4)
    estimates = None
    if spec.kind.blind:
        if spec.initial_estimates is not None:
            estimates = RateEstimates.from_values(spec.initial_estimates)
        else:
            estimates = init_estimates(L, np.random.default_rng(init_ss), spec.init_low, spec.init_high)
    policy = make_policy(spec.kind, B, L, rng=UniformStream(np.random.default_rng(dec_ss)),
                         estimates=estimates, exploration=spec.exploration, exponent=spec.exponent)
    return Engine(B, policy, arrivals, service, config, np.random.default_rng(arr_ss),
                  np.random.default_rng(svc_ss), lam=lam, replication=replication)


@dataclass
class RunSummary:
    policy: str
    lam: float
    reports: list[MetricsReport]

    def _stat(self, attr):
        x = np.array([getattr(r, attr) for r in self.reports], dtype=float)
        return float(x.mean()), float(x.std(ddof=1)) if x.size > 1 else 0.0

    @property
    def mean_completion_time(self) -> tuple[float, float]:
        return self._stat("mean_completion_time")

    @property
    def backlog_slope(self) -> tuple[float, float]:
        return self._stat("backlog_slope")

    @property
    def invariant_violations(self) -> int:
        return sum(r.invariant_violations for r in self.reports)


def _replicate(args) -> MetricsReport:
    B, spec, arrivals, service, config, lam, r = args
    return build_engine(B, spec, arrivals, service, config, lam, r).run()


def run(B: RateMatrix, spec: PolicySpec, arrivals: ArrivalSpec, service: ServiceSpec,
        config: EngineConfig, replications: int, lam: float = math.nan, workers: int = 1) -> RunSummary:
    """Independent replications; replication ``r`` is seeded with ``derive_seed(config.seed, r)``."""
    if replications < 1:
        raise ValueError("need at least one replication")
    jobs = []
    for r in range(replications):
        cfg = EngineConfig(**{**config.__dict__, "seed": derive_seed(config.seed, r)})
        jobs.append((B, spec, arrivals, service, cfg, lam, r))
    if workers > 1 and replications > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=min(workers, replications)) as pool:
            reports = list(pool.map(_replicate, jobs))
    else:
        reports = [_replicate(j) for j in jobs]
    return RunSummary(spec.label, lam, reports)
