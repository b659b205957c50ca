"""The hand-written simplex against scipy's HiGHS as an independent oracle."""
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import linprog as scipy_linprog

from affinity_sim.lp import linprog


def test_small_known_optimum():
    # max x + y s.t. x + 2y <= 4, 3x + y <= 6
    res = linprog(np.array([-1.0, -1.0]), A_ub=np.array([[1.0, 2.0], [3.0, 1.0]]), b_ub=np.array([4.0, 6.0]))
    assert res.status == "optimal"
    np.testing.assert_allclose(res.x, [1.6, 1.2], atol=1e-12)
    assert res.objective == pytest.approx(-2.8)


def test_infeasible_and_unbounded():
    res = linprog(np.array([1.0]), A_eq=np.array([[1.0]]), b_eq=np.array([-1.0]))
    assert res.status == "infeasible"
    res = linprog(np.array([-1.0, 0.0]), A_ub=np.array([[0.0, 1.0]]), b_ub=np.array([1.0]))
    assert res.status == "unbounded"


def test_degenerate_problem_terminates():
    # classic cycling example under the largest-coefficient rule
    c = np.array([-0.75, 150.0, -0.02, 6.0])
    A = np.array([[0.25, -60.0, -0.04, 9.0], [0.5, -90.0, -0.02, 3.0], [0.0, 0.0, 1.0, 0.0]])
    b = np.array([0.0, 0.0, 1.0])
    res = linprog(c, A_ub=A, b_ub=b)
    ref = scipy_linprog(c, A_ub=A, b_ub=b, method="highs")
    assert res.status == "optimal"
    assert res.objective == pytest.approx(ref.fun, abs=1e-9)


@st.composite
def lp_instances(draw):
    n = draw(st.integers(1, 6))
    k_ub = draw(st.integers(0, 4))
    k_eq = draw(st.integers(0, 3))
    f = st.floats(-5, 5, allow_nan=False).map(lambda v: round(v, 2))
    c = np.array([draw(f) for _ in range(n)])
    A_ub = np.array([[draw(f) for _ in range(n)] for _ in range(k_ub)]).reshape(k_ub, n)
    b_ub = np.array([abs(draw(f)) for _ in range(k_ub)])
    A_eq = np.array([[abs(draw(f)) for _ in range(n)] for _ in range(k_eq)]).reshape(k_eq, n)
    b_eq = np.array([abs(draw(f)) for _ in range(k_eq)])
    # a box keeps most instances bounded
    A_ub = np.vstack([A_ub, np.eye(n)])
    b_ub = np.concatenate([b_ub, np.full(n, 10.0)])
    return c, A_ub, b_ub, (A_eq if k_eq else None), (b_eq if k_eq else None)


@given(lp_instances())
def test_matches_scipy(inst):
    c, A_ub, b_ub, A_eq, b_eq = inst
    ours = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq)
    ref = scipy_linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq, method="highs")
    if ref.status == 2:
        assert ours.status == "infeasible"
        return
    assert ref.status == 0
    assert ours.status == "optimal"
    assert ours.objective == pytest.approx(ref.fun, abs=1e-7)
    assert np.all(ours.x >= -1e-9)
    assert np.all(A_ub @ ours.x <= b_ub + 1e-9)
    if A_eq is not None:
        np.testing.assert_allclose(A_eq @ ours.x, b_eq, atol=1e-9)
