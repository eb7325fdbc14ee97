import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import linprog

from flexkit.solvers import (INFEASIBLE, OPTIMAL, UNBOUNDED, LPProblem, dual_objective,
                             solve_lp)


def test_single_bound_dual():
    out = solve_lp(LPProblem([1.0], [[1.0]], [1.0], [">="], lb=[-np.inf]))
    assert out.status == OPTIMAL
    assert out.x[0] == pytest.approx(1.0)
    assert out.duals[0] == pytest.approx(1.0)


def test_infeasible():
    out = solve_lp(LPProblem([0.0], [[1.0]], [-1.0], ["<="]))
    assert out.status == INFEASIBLE


def test_unbounded_has_ray():
    out = solve_lp(LPProblem([-1.0, 0.0], [[1.0, -1.0]], [0.0], ["<="]))
    assert out.status == UNBOUNDED
    assert out.ray is not None and out.ray[0] > 0


def test_design_a_feasible_center_lp():
    # max s  s.t.  theta1+theta2+s <= 14, theta1-2theta2+s <= 2, -theta1+s <= 0, -theta2+s <= 0
    A = np.array([[1, 1, 1], [1, -2, 1], [-1, 0, 1], [0, -1, 1.0]])
    out = solve_lp(LPProblem([0, 0, -1.0], A, [14, 2, 0, 0], lb=[-np.inf] * 3))
    assert out.status == OPTIMAL
    assert out.x == pytest.approx([14 / 3, 14 / 3, 14 / 3])


def _random_lp(rng):
    n = int(rng.integers(2, 7))
    m = int(rng.integers(1, 7))
    A = rng.normal(size=(m, n)).round(2)
    x0 = rng.uniform(0, 3, n)
    senses = list(rng.choice(["<=", ">=", "="], size=m, p=[0.5, 0.3, 0.2]))
    b = A @ x0
    b = np.where(np.array(senses) == "<=", b + rng.uniform(0, 2, m),
                 np.where(np.array(senses) == ">=", b - rng.uniform(0, 2, m), b))
    c = rng.normal(size=n).round(2)
    lb = np.where(rng.random(n) < 0.3, -np.inf, 0.0)
    ub = np.where(rng.random(n) < 0.5, 5.0, np.inf)
    return LPProblem(c, A, b, senses, lb, ub)


def _highs(p):
    ub_rows = [i for i, s in enumerate(p.senses) if s != "="]
    sign = np.array([1.0 if p.senses[i] == "<=" else -1.0 for i in ub_rows])
    eq = [i for i, s in enumerate(p.senses) if s == "="]
    return linprog(p.c, A_ub=p.A[ub_rows] * sign[:, None] if ub_rows else None,
                   b_ub=p.b[ub_rows] * sign if ub_rows else None,
                   A_eq=p.A[eq] if eq else None, b_eq=p.b[eq] if eq else None,
                   bounds=list(zip(np.where(np.isinf(p.lb), None, p.lb),
                                   np.where(np.isinf(p.ub), None, p.ub))), method="highs")


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 10**6))
def test_against_highs(seed):
    p = _random_lp(np.random.default_rng(seed))
    out = solve_lp(p)
    ref = _highs(p)
    status = {0: OPTIMAL, 2: INFEASIBLE, 3: UNBOUNDED}[ref.status]
    assert out.status == status
    if status != OPTIMAL:
        return
    assert out.objective == pytest.approx(ref.fun, abs=1e-7, rel=1e-7)
    # primal feasibility, strong duality, dual sign and complementary slackness
    r = p.A @ out.x - p.b
    for i, s in enumerate(p.senses):
        if s == "<=":
            assert r[i] <= 1e-8 and out.duals[i] <= 1e-8
            assert abs(r[i] * out.duals[i]) <= 1e-7
        elif s == ">=":
            assert r[i] >= -1e-8 and out.duals[i] >= -1e-8
            assert abs(r[i] * out.duals[i]) <= 1e-7
        else:
            assert abs(r[i]) <= 1e-8
    assert np.all(out.x >= p.lb - 1e-8) and np.all(out.x <= p.ub + 1e-8)
    assert dual_objective(p, out) == pytest.approx(out.objective, abs=1e-7, rel=1e-7)


def test_deterministic():
    p = _random_lp(np.random.default_rng(5))
    a, b = solve_lp(p), solve_lp(p)
    assert a.status == b.status and np.array_equal(a.x, b.x) and a.iterations == b.iterations


def test_degenerate_cycling_example():
    # Beale's classic cycling instance
    c = np.array([-0.75, 20, -0.5, 6])
    A = np.array([[0.25, -8, -1, 9], [0.5, -12, -0.5, 3], [0, 0, 1, 0]])
    out = solve_lp(LPProblem(c, A, [0, 0, 1]))
    assert out.status == OPTIMAL and out.objective == pytest.approx(-1.25)
