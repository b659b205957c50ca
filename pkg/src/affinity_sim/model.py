"""Core domain types: rate matrices, locality structure, tasks and system state.

Internally every index (task type, server, locality level) is 0-based.  Reports
and CSV output convert to 1-based numbering.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

IDLE = -1


class RateMatrix:
    """Service rates ``mu[i, m]`` of task type ``i`` on server ``m`` (tasks per slot)."""

    def __init__(self, rates: Sequence[Sequence[float]] | np.ndarray):
        arr = np.array(rates, dtype=float)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"rate matrix must be a non-empty 2-D array, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
            raise ValueError("rate matrix entries must be finite and strictly positive")
        arr.setflags(write=False)
        self.values = arr

    @property
    def n_types(self) -> int:
        return self.values.shape[0]

    @property
    def n_servers(self) -> int:
        return self.values.shape[1]

    def __getitem__(self, key):
        return self.values[key]

    def __eq__(self, other):
        return isinstance(other, RateMatrix) and np.array_equal(self.values, other.values)

    def __repr__(self):
        return f"RateMatrix({self.values.tolist()!r})"

    def scaled(self, k: float) -> "RateMatrix":
        return RateMatrix(self.values * k)

    def tolist(self) -> list[list[float]]:
        return self.values.tolist()


@dataclass(frozen=True)
class LocalityStructure:
    """Per-server distinct rates (descending) and the type -> level map.

    ``distinct_rates[m][n]`` is the rate of level ``n`` on server ``m``;
    ``level_of[i][m]`` is the level of type ``i`` on server ``m``;
    ``locality_sets[m][n]`` holds the types that are ``n``-local to ``m``.
    """

    distinct_rates: tuple[tuple[float, ...], ...]
    level_of: tuple[tuple[int, ...], ...]
    locality_sets: tuple[tuple[frozenset[int], ...], ...]

    @property
    def n_servers(self) -> int:
        return len(self.distinct_rates)

    @property
    def n_types(self) -> int:
        return len(self.level_of)

    def n_levels(self, m: int) -> int:
        return len(self.distinct_rates[m])


def build_locality_structure(B: RateMatrix) -> LocalityStructure:
    # Exact float comparison: rates come from config literals.
    rates = B.values
    distinct, locality_sets = [], []
    level_of = [[0] * B.n_servers for _ in range(B.n_types)]
    for m in range(B.n_servers):
        column = [float(x) for x in rates[:, m]]
        alphas = tuple(sorted(set(column), reverse=True))
        index = {a: n for n, a in enumerate(alphas)}
        for i, x in enumerate(column):
            level_of[i][m] = index[x]
        distinct.append(alphas)
        locality_sets.append(
            tuple(frozenset(i for i, x in enumerate(column) if x == a) for a in alphas)
        )
    return LocalityStructure(
        distinct_rates=tuple(distinct),
        level_of=tuple(tuple(row) for row in level_of),
        locality_sets=tuple(locality_sets),
    )


@dataclass(slots=True)
class Task:
    id: int
    type: int
    arrival_slot: int
    completion_slot: int | None = None

    @property
    def completion_time(self) -> int:
        # Counts every slot the task spends in the system, the final service slot included.
        return self.completion_slot - self.arrival_slot + 1


@dataclass
class SystemState:
    """Mutable queueing state (Q, eta, Psi) shared by the engine and the policies.

    ``eta[m]`` is the level of the in-service task for the sub-queue
    architecture and its task type for the central and single-queue
    architectures; ``IDLE`` when the server is free.
    """

    sub_queues: list[list[deque]]
    central_queues: list[deque]
    fcfs_queue: deque
    eta: list[int]
    psi: list[int]
    in_service: list[Task | None]
    remaining: list[int]
    clock: int = 1

    @classmethod
    def empty(cls, L: LocalityStructure) -> "SystemState":
        M = L.n_servers
        return cls(
            sub_queues=[[deque() for _ in range(L.n_levels(m))] for m in range(M)],
            central_queues=[deque() for _ in range(L.n_types)],
            fcfs_queue=deque(),
            eta=[IDLE] * M,
            psi=[0] * M,
            in_service=[None] * M,
            remaining=[0] * M,
        )

    def queue_lengths(self, m: int) -> list[int]:
        return [len(q) for q in self.sub_queues[m]]

    def n_queued(self) -> int:
        return (
            sum(len(q) for qs in self.sub_queues for q in qs)
            + sum(len(q) for q in self.central_queues)
            + len(self.fcfs_queue)
        )

    def n_in_system(self) -> int:
        return self.n_queued() + sum(t is not None for t in self.in_service)


def workload(state: SystemState, L: LocalityStructure, m: int) -> float:
    """Expected slots for server ``m`` to drain its queued tasks (in-service task excluded)."""
    w = 0.0
    for q, a in zip(state.sub_queues[m], L.distinct_rates[m]):
        if q:
            w += len(q) / a
    return w
