"""Dense two-phase simplex for the tiny LPs behind the capacity region.

Solves ``min c @ x`` subject to ``A_ub @ x <= b_ub``, ``A_eq @ x == b_eq`` and
``x >= 0``.  Bland's rule is used for pivoting, so it cannot cycle; the
instances here have at most a few dozen variables.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

EPS = 1e-11


class LPError(Exception):
    pass


@dataclass
class LPResult:
    status: str  # "optimal" | "infeasible" | "unbounded"
    x: np.ndarray | None
    objective: float | None


def _pivot(T: np.ndarray, basis: list[int], row: int, col: int) -> None:
    T[row] /= T[row, col]
    for r in range(T.shape[0]):
        if r != row and T[r, col] != 0.0:
            T[r] -= T[r, col] * T[row]
    basis[row] = col


def _iterate(T: np.ndarray, basis: list[int], n_cols: int, max_iter: int) -> str:
    """Run simplex iterations on tableau ``T`` whose last row is the reduced cost row."""
    for _ in range(max_iter):
        cost = T[-1, :n_cols]
        entering = next((j for j in range(n_cols) if cost[j] < -EPS), None)
        if entering is None:
            return "optimal"
        column = T[:-1, entering]
        best, leaving = np.inf, None
        for r in range(len(basis)):
            if column[r] > EPS:
                ratio = T[r, -1] / column[r]
                # Bland: among ties take the smallest basic index
                if ratio < best - EPS or (abs(ratio - best) <= EPS and basis[r] < basis[leaving]):
                    best, leaving = ratio, r
        if leaving is None:
            return "unbounded"
        _pivot(T, basis, leaving, entering)
    raise LPError("simplex iteration limit reached")


def linprog(c, A_ub=None, b_ub=None, A_eq=None, b_eq=None, max_iter: int = 10_000) -> LPResult:
    c = np.asarray(c, dtype=float)
    n = c.size
    A_ub = np.zeros((0, n)) if A_ub is None else np.asarray(A_ub, dtype=float).reshape(-1, n)
    b_ub = np.zeros(0) if b_ub is None else np.asarray(b_ub, dtype=float)
    A_eq = np.zeros((0, n)) if A_eq is None else np.asarray(A_eq, dtype=float).reshape(-1, n)
    b_eq = np.zeros(0) if b_eq is None else np.asarray(b_eq, dtype=float)

    n_ub, n_eq = A_ub.shape[0], A_eq.shape[0]
    rows = n_ub + n_eq
    # standard form: [A_ub I; A_eq 0] [x; s] = b
    A = np.zeros((rows, n + n_ub))
    A[:n_ub, :n] = A_ub
    A[:n_ub, n:] = np.eye(n_ub)
    A[n_ub:, :n] = A_eq
    b = np.concatenate([b_ub, b_eq])
    neg = b < 0
    A[neg] *= -1
    b[neg] *= -1

    n_std = n + n_ub
    # phase 1 with one artificial per row
    T = np.zeros((rows + 1, n_std + rows + 1))
    T[:rows, :n_std] = A
    T[:rows, n_std:n_std + rows] = np.eye(rows)
    T[:rows, -1] = b
    T[-1, :] = -T[:rows, :].sum(axis=0)
    T[-1, n_std:n_std + rows] = 0.0
    basis = list(range(n_std, n_std + rows))
    _iterate(T, basis, n_std + rows, max_iter)
    if -T[-1, -1] > 1e-9 * max(1.0, float(np.abs(b).max(initial=0.0))):
        return LPResult("infeasible", None, None)

    # drive artificials out of the basis; drop redundant rows
    keep = []
    for r in range(rows):
        if basis[r] >= n_std:
            col = next((j for j in range(n_std) if abs(T[r, j]) > EPS), None)
            if col is None:
                continue
            _pivot(T, basis, r, col)
        keep.append(r)
    T2 = np.zeros((len(keep) + 1, n_std + 1))
    T2[:-1, :n_std] = T[keep, :n_std]
    T2[:-1, -1] = T[keep, -1]
    basis = [basis[r] for r in keep]

    cost = np.zeros(n_std)
    cost[:n] = c
    T2[-1, :n_std] = cost
    for r, j in enumerate(basis):
        if cost[j] != 0.0:
            T2[-1] -= cost[j] * T2[r]
    status = _iterate(T2, basis, n_std, max_iter)
    if status == "unbounded":
        return LPResult("unbounded", None, None)

    x = np.zeros(n_std)
    for r, j in enumerate(basis):
        x[j] = T2[r, -1]
    x = np.clip(x[:n], 0.0, None)
    return LPResult("optimal", x, float(c @ x))
