"""Capacity region of the affinity system: load decompositions and boundary throughput."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .lp import linprog
from .model import RateMatrix

ROW_TOL = 1e-9


@dataclass(frozen=True)
class Decomposition:
    """Split ``lambda_im[i, m]`` of each type's arrival rate across servers."""

    lambda_im: np.ndarray
    slack: float

    def server_loads(self, B: RateMatrix) -> np.ndarray:
        return (self.lambda_im / B.values).sum(axis=0)


@dataclass(frozen=True)
class IdealWorkload:
    w: np.ndarray


def min_max_load(B: RateMatrix, lam: Sequence[float]) -> tuple[float, np.ndarray]:
    """Smallest achievable maximum server load, with the decomposition attaining it.

    Variables are the ``N_T * M`` entries of the decomposition (row-major)
    followed by the load bound ``s``.
    """
    lam = np.asarray(lam, dtype=float)
    N, M = B.values.shape
    nv = N * M + 1
    c = np.zeros(nv)
    c[-1] = 1.0
    A_eq = np.zeros((N, nv))
    for i in range(N):
        A_eq[i, i * M:(i + 1) * M] = 1.0
    A_ub = np.zeros((M, nv))
    for m in range(M):
        for i in range(N):
            A_ub[m, i * M + m] = 1.0 / B.values[i, m]
        A_ub[m, -1] = -1.0
    res = linprog(c, A_ub=A_ub, b_ub=np.zeros(M), A_eq=A_eq, b_eq=lam)
    if res.status != "optimal":
        raise RuntimeError(f"load-balancing LP returned {res.status}")
    x = res.x[:-1].reshape(N, M)
    loads = (x / B.values).sum(axis=0)
    return float(loads.max()), x


def feasible_decomposition(B: RateMatrix, lam: Sequence[float], epsilon: float) -> Decomposition | None:
    """A decomposition keeping every server load at most ``1 - epsilon``, or None."""
    lam = np.asarray(lam, dtype=float)
    if lam.shape != (B.n_types,):
        raise ValueError(f"expected {B.n_types} arrival rates, got shape {lam.shape}")
    if np.any(lam < 0):
        raise ValueError("arrival rates must be non-negative")
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    s, x = min_max_load(B, lam)
    if s > 1.0 - epsilon + ROW_TOL:
        return None
    slack = math.inf if s <= 0 else 1.0 / s - 1.0
    return Decomposition(lambda_im=x, slack=slack)


def max_scalar_throughput(B: RateMatrix, proportions: Sequence[float], tol: float = 1e-6) -> float:
    """Largest total rate ``lam`` such that ``lam * proportions`` is in the capacity region."""
    p = np.asarray(proportions, dtype=float)
    if p.shape != (B.n_types,) or np.any(p < 0) or abs(p.sum() - 1.0) > 1e-12:
        raise ValueError("proportions must be a probability vector over task types")
    if tol <= 0:
        raise ValueError("tol must be positive")
    lo, hi = 0.0, float(B.values.max(axis=0).sum())
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if min_max_load(B, mid * p)[0] < 1.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def ideal_workload(dec: Decomposition, B: RateMatrix) -> IdealWorkload:
    return IdealWorkload(w=dec.server_loads(B))
