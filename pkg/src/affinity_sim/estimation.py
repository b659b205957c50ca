"""Online service-rate estimates and the decaying exploration schedule."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import LocalityStructure, SystemState


@dataclass
class RateEstimates:
    """Running estimate ``alpha_hat[m][n]`` of each (server, level) rate.

    ``counts[m][n]`` is the number of service observations folded in so far.
    """

    alpha_hat: list[list[float]]
    counts: list[list[int]]

    def rate(self, L: LocalityStructure, i: int, m: int) -> float:
        return self.alpha_hat[m][L.level_of[i][m]]

    def rate_matrix(self, L: LocalityStructure) -> list[list[float]]:
        """Estimated rate of every (type, server) pair, mapped through the level structure."""
        return [
            [self.alpha_hat[m][L.level_of[i][m]] for m in range(L.n_servers)]
            for i in range(L.n_types)
        ]

    def copy(self) -> "RateEstimates":
        return RateEstimates([list(r) for r in self.alpha_hat], [list(c) for c in self.counts])

    @classmethod
    def from_values(cls, alpha_hat) -> "RateEstimates":
        alpha_hat = [[float(a) for a in row] for row in alpha_hat]
        if any(a <= 0 for row in alpha_hat for a in row):
            raise ValueError("rate estimates must be strictly positive")
        return cls(alpha_hat, [[0] * len(row) for row in alpha_hat])


def init_estimates(L: LocalityStructure, rng: np.random.Generator,
                   low: float = 0.1, high: float = 1.0) -> RateEstimates:
    if low <= 0:
        raise ValueError("low must be positive")
    if low >= high:
        raise ValueError("low must be strictly below high")
    alpha = [[float(rng.uniform(low, high)) for _ in range(L.n_levels(m))]
             for m in range(L.n_servers)]
    return RateEstimates(alpha, [[0] * L.n_levels(m) for m in range(L.n_servers)])


def record_service(est: RateEstimates, m: int, n: int, T_obs: int) -> RateEstimates:
    """Fold one observed service time (in slots) into the (m, n) estimate, in place.

    The estimate is the running mean of observed rates ``1/T``; the first
    observation overwrites the random initial value.
    """
    if T_obs < 1:
        raise ValueError(f"observed service time must be >= 1 slot, got {T_obs}")
    k = est.counts[m][n] + 1
    est.alpha_hat[m][n] = (k - 1) / k * est.alpha_hat[m][n] + 1.0 / (k * T_obs)
    est.counts[m][n] = k
    return est


def estimated_workload(state: SystemState, est: RateEstimates, m: int) -> float:
    w = 0.0
    for q, a in zip(state.sub_queues[m], est.alpha_hat[m]):
        if q:
            w += len(q) / a
    return w


@dataclass(frozen=True)
class ExplorationSchedule:
    """Exploration probability ``p(t) = min(1, (t + t_offset - 1) ** -c)``.

    ``enabled=False`` pins the probability to zero (pure exploitation).
    """

    c: float = 0.5
    t_offset: int = 1
    enabled: bool = True

    def __post_init__(self):
        if not 0 < self.c <= 1:
            raise ValueError(f"exponent c must lie in (0, 1], got {self.c}")
        if self.t_offset < 1:
            raise ValueError("t_offset must be a positive integer")

    def probability(self, t: int) -> float:
        if not self.enabled:
            return 0.0
        return min(1.0, float(t + self.t_offset - 1) ** -self.c)


NO_EXPLORATION = ExplorationSchedule(enabled=False)


def should_explore(sched: ExplorationSchedule, t: int, rng) -> bool:
    """Draw the explore/exploit coin for slot ``t``; ``rng`` only needs ``random()``."""
    if t < 1:
        raise ValueError("slots are numbered from 1")
    p = sched.probability(t)
    if p <= 0.0:
        return False
    return rng.random() < p
