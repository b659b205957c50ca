import time

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import linprog as scipy_linprog

from affinity_sim.capacity import (Decomposition, feasible_decomposition, ideal_workload,
                                   max_scalar_throughput, min_max_load)
from affinity_sim.model import RateMatrix
from helpers import THREE_SERVER, THREE_P

B3 = RateMatrix(THREE_SERVER)


def scipy_capacity(B: RateMatrix, p) -> float:
    """Oracle: maximise lam subject to sum_m x_im = lam p_i and every server load <= 1."""
    N, M = B.values.shape
    nv = N * M + 1
    c = np.zeros(nv)
    c[-1] = -1.0
    A_eq = np.zeros((N, nv))
    for i in range(N):
        A_eq[i, i * M:(i + 1) * M] = 1.0
        A_eq[i, -1] = -p[i]
    A_ub = np.zeros((M, nv))
    for m in range(M):
        for i in range(N):
            A_ub[m, i * M + m] = 1.0 / B.values[i, m]
    res = scipy_linprog(c, A_ub=A_ub, b_ub=np.ones(M), A_eq=A_eq, b_eq=np.zeros(N), method="highs")
    return -res.fun


def test_single_cell():
    dec = feasible_decomposition(RateMatrix([[1.0]]), [0.5], 0.1)
    assert dec.lambda_im[0, 0] == pytest.approx(0.5)
    assert dec.server_loads(RateMatrix([[1.0]]))[0] <= 0.9


def test_boundary_is_infeasible():
    assert feasible_decomposition(B3, [1.0, 0.5, 1.0], 1e-6) is None


def test_total_2_4_is_feasible():
    lam = [0.96, 0.48, 0.96]
    dec = feasible_decomposition(B3, lam, 1e-3)
    assert dec is not None
    np.testing.assert_allclose(dec.lambda_im.sum(axis=1), lam, atol=1e-9)
    assert np.all(dec.lambda_im >= -1e-12)
    w = ideal_workload(dec, B3).w
    assert np.all(w <= 1 - 1e-3 + 1e-9)
    assert np.all(w <= 1 / (1 + dec.slack) + 1e-9)
    assert dec.slack > 0
    assert scipy_capacity(B3, np.array(lam) / 2.4) > 2.4


def test_input_validation():
    with pytest.raises(ValueError):
        feasible_decomposition(B3, [1.0, 1.0], 0.1)
    with pytest.raises(ValueError):
        feasible_decomposition(B3, [0.1, 0.1, 0.1], 0.0)
    with pytest.raises(ValueError):
        max_scalar_throughput(B3, [0.5, 0.5, 0.5])


def test_three_server_capacity_is_2_5():
    t0 = time.perf_counter()
    lam = max_scalar_throughput(B3, THREE_P, tol=1e-6)
    assert time.perf_counter() - t0 < 1.0
    assert lam == pytest.approx(2.5, abs=1e-5)
    assert scipy_capacity(B3, np.array(THREE_P)) == pytest.approx(2.5, abs=1e-9)


def test_bisection_brackets_boundary():
    tol = 1e-6
    lam = max_scalar_throughput(B3, THREE_P, tol=tol)
    p = np.array(THREE_P)
    assert feasible_decomposition(B3, (lam - tol) * p, 1e-9) is not None
    assert feasible_decomposition(B3, (lam + tol) * p, 1e-9) is None


def test_two_by_two_and_single_server():
    assert max_scalar_throughput(RateMatrix([[1.0, 0.5], [0.5, 1.0]]), [0.5, 0.5]) == pytest.approx(2.0, abs=1e-5)
    assert scipy_capacity(RateMatrix([[1.0, 0.5], [0.5, 1.0]]), [0.5, 0.5]) == pytest.approx(2.0)
    assert max_scalar_throughput(RateMatrix([[1.0]]), [1.0]) == pytest.approx(1.0, abs=1e-5)
    assert max_scalar_throughput(RateMatrix([[2.0]]), [1.0]) == pytest.approx(2.0, abs=1e-5)


def test_ideal_workload_examples():
    B = RateMatrix([[1.0, 0.5]])
    assert np.all(ideal_workload(Decomposition(np.zeros((1, 2)), 1.0), B).w == 0)
    w = ideal_workload(Decomposition(np.array([[0.5, 0.0]]), 1.0), B).w
    np.testing.assert_allclose(w, [0.5, 0.0])


rate_vals = st.sampled_from([1.0, 0.5, 0.25, 0.8, 0.3])


@st.composite
def systems(draw):
    n = draw(st.integers(1, 4))
    m = draw(st.integers(1, 4))
    B = RateMatrix([[draw(rate_vals) for _ in range(m)] for _ in range(n)])
    w = np.array([draw(st.integers(0, 5)) for _ in range(n)], dtype=float)
    if w.sum() == 0:
        w[0] = 1.0
    return B, w / w.sum()


@given(systems())
def test_capacity_matches_scipy(sys_):
    B, p = sys_
    assert max_scalar_throughput(B, p, tol=1e-7) == pytest.approx(scipy_capacity(B, p), abs=1e-6)


@given(systems(), st.floats(1.5, 4.0))
def test_capacity_scales_with_rates(sys_, k):
    B, p = sys_
    assert max_scalar_throughput(B.scaled(k), p, tol=1e-8) == pytest.approx(
        k * max_scalar_throughput(B, p, tol=1e-8), abs=1e-6 * k)


@given(systems(), st.floats(0.05, 0.9), st.floats(0.0, 1.0))
def test_feasibility_is_monotone(sys_, frac, shrink):
    B, p = sys_
    lam = frac * max_scalar_throughput(B, p) * p
    dec = feasible_decomposition(B, lam, 1e-6)
    assert dec is not None
    eps = 1 - min_max_load(B, lam)[0]
    smaller = lam * shrink
    dec2 = feasible_decomposition(B, smaller, max(eps - 1e-9, 1e-12))
    assert dec2 is not None
