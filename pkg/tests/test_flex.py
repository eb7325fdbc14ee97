import itertools

import numpy as np
import pytest

from flexkit import (CVaRNorm, Ellipsoid, Hyperbox, Intersection, PNorm, check_certificate,
                     flexibility_index, nonnegative, psi, rank_constraints, verify_solution)
from flexkit.errors import InfeasibleNominal, Unbounded
from flexkit.flex import compare_designs
from conftest import COV, DEV, MEAN
from oracles import box_corner, ellipsoid_touch, random_recourse_free, system_from_arrays


def test_design_a_ellipsoid(design_a, ellipsoid):
    sol = flexibility_index(design_a, ellipsoid)
    assert sol.F == pytest.approx(25 / 7, rel=1e-9)
    assert sol.active_labels == ["f1"]
    assert list(sol.y) == [1, 0, 0, 0]
    assert check_certificate(sol)["passed"]


def test_design_b_values(design_b, ellipsoid, box):
    sol = flexibility_index(design_b, box)
    assert sol.F == pytest.approx(0.66302, abs=1e-5)
    assert sol.active_labels == ["f2"]
    sol = flexibility_index(design_b, ellipsoid)
    assert sol.F == pytest.approx(6.4, rel=1e-9)
    assert sol.active_labels == ["f1"]


def test_single_constraint_linf():
    system = system_from_arrays(np.array([[1.0, 0.0]]), np.array([MEAN[0] + 2.5]))
    sol = flexibility_index(system, PNorm(MEAN, np.inf))
    assert sol.F == pytest.approx(2.5, rel=1e-9)


def test_nominal_on_boundary_gives_zero():
    system = system_from_arrays(np.array([[1.0, 0.0]]), np.array([MEAN[0]]))
    assert flexibility_index(system, PNorm(MEAN, np.inf)).F == pytest.approx(0.0, abs=1e-12)


def test_infeasible_nominal(design_a):
    with pytest.raises(InfeasibleNominal):
        flexibility_index(design_a, Ellipsoid([10.0, 5.0], COV))


def test_non_binding_constraints_unbounded():
    # the only constraint can always be relaxed by the recourse variable
    from flexkit import AffineConstraint, LinearSystem
    rows = (AffineConstraint("f", [1.0], [-1.0], [], 0.0),)
    system = LinearSystem(("t",), ("z",), (), rows, ())
    with pytest.raises(Unbounded):
        flexibility_index(system, PNorm([0.0], np.inf))


@pytest.mark.parametrize("seed", range(50))
def test_oracles_recourse_free(seed):
    rng = np.random.default_rng(seed)
    G, g, theta_bar, V = random_recourse_free(rng)
    system = system_from_arrays(G, g)
    sol = flexibility_index(system, Ellipsoid(theta_bar, V), sweep=False)
    assert sol.F == pytest.approx(ellipsoid_touch(G, g, theta_bar, V), rel=1e-6)
    dm, dp = rng.uniform(0.2, 2.0, (2, G.shape[1]))
    sol = flexibility_index(system, Hyperbox(theta_bar, dm, dp), sweep=False)
    assert sol.F == pytest.approx(box_corner(G, g, theta_bar, dm, dp), rel=1e-6)


def _box_vertex_oracle(system, theta_bar, dm, dp, hi=50.0):
    """Largest box scaling whose corners are all feasible, by bisection (the feasible set is convex)."""
    signs = np.array(list(itertools.product((-1, 1), repeat=theta_bar.size)))

    def ok(d):
        pts = theta_bar + np.where(signs > 0, d * dp, -d * dm)
        return all(psi(system, p) <= 1e-10 for p in pts)
    lo = 0.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if ok(mid) else (lo, mid)
    return lo


def test_recourse_box_against_vertex_oracle():
    from test_feasibility import _recourse_system
    system = _recourse_system()
    theta_bar = np.array([3.0, 2.0])
    dm = dp = np.array([1.0, 0.5])
    sol = flexibility_index(system, Hyperbox(theta_bar, dm, dp))
    assert sol.F == pytest.approx(_box_vertex_oracle(system, theta_bar, dm, dp), rel=1e-9)
    assert check_certificate(sol)["passed"]
    assert verify_solution(sol, samples=2_000)["violations"] == 0


@pytest.mark.parametrize("k", [0.25, 2.0, 7.5])
def test_ellipsoid_scale_law(design_a, k):
    F1 = flexibility_index(design_a, Ellipsoid(MEAN, COV)).F
    Fk = flexibility_index(design_a, Ellipsoid(MEAN, k * COV)).F
    assert Fk == pytest.approx(F1 / k, rel=1e-9)


def test_scale_law_random():
    rng = np.random.default_rng(42)
    for _ in range(10):
        G, g, theta_bar, V = random_recourse_free(rng)
        system = system_from_arrays(G, g)
        k = rng.uniform(0.1, 10)
        F1 = flexibility_index(system, Ellipsoid(theta_bar, V), sweep=False).F
        Fk = flexibility_index(system, Ellipsoid(theta_bar, k * V), sweep=False).F
        assert Fk == pytest.approx(F1 / k, rel=1e-9)


def test_box_translation_and_scaling(design_a):
    F1 = flexibility_index(design_a, Hyperbox(MEAN, DEV, DEV)).F
    F2 = flexibility_index(design_a, Hyperbox(MEAN, 2 * DEV, 2 * DEV)).F
    assert F2 == pytest.approx(F1 / 2, rel=1e-9)
    shifted = Hyperbox(MEAN + [1.0, 0.0], DEV, DEV)
    G = np.array([[1, 1], [1, -2], [-1, 0], [0, -1.0]])
    g = np.array([14, 2, 0, 0.0])
    assert flexibility_index(design_a, shifted).F == pytest.approx(
        box_corner(G, g, MEAN + [1.0, 0.0], DEV, DEV), rel=1e-9)


def test_intersection_dominance(design_a):
    for center in ([4.0, 5.0], [1.0, 5.0], [4.0, 1.0]):
        plain = flexibility_index(design_a, Ellipsoid(center, COV)).F
        trunc = flexibility_index(design_a, Intersection([Ellipsoid(center, COV), nonnegative(2)])).F
        assert trunc >= plain - 1e-9


def test_containment_monotonicity(design_a):
    linf = flexibility_index(design_a, PNorm(MEAN, np.inf)).F
    inner_box = flexibility_index(design_a, Hyperbox(MEAN, [0.5, 1.0], [1.0, 0.3])).F
    l1 = flexibility_index(design_a, PNorm(MEAN, 1)).F
    assert inner_box >= linf - 1e-9
    assert l1 >= linf - 1e-9
    cvar = flexibility_index(design_a, CVaRNorm(MEAN, 0.0)).F
    assert cvar == pytest.approx(l1, rel=1e-9)


def test_verify_design_a(design_a, ellipsoid):
    sol = flexibility_index(design_a, ellipsoid)
    rep = verify_solution(sol, samples=10_000, seed=0)
    assert rep["violations"] == 0 and rep["passed"]
    assert rep["outer_violations"] >= 1
    zero = system_from_arrays(np.array([[1.0, 0.0]]), np.array([MEAN[0]]))
    sol0 = flexibility_index(zero, ellipsoid)
    assert verify_solution(sol0, samples=100)["violations"] == 0


def test_certificates_random():
    rng = np.random.default_rng(7)
    for _ in range(20):
        G, g, theta_bar, V = random_recourse_free(rng)
        sol = flexibility_index(system_from_arrays(G, g), Ellipsoid(theta_bar, V), sweep=False)
        cert = check_certificate(sol)
        assert cert["passed"], cert


def test_ranking_design_a(design_a, ellipsoid):
    ranking = rank_constraints(design_a, ellipsoid, max_levels=4)
    assert [lv.constraint_labels for lv in ranking] == [["f1"], ["f2"], ["f3"], ["f4"]]
    F = [lv.F_value for lv in ranking]
    assert F == pytest.approx([25 / 7, 6.4, 8.0, 25 / 3], rel=1e-8)
    assert ranking[0].increase_pct is None
    assert ranking[1].increase_pct == pytest.approx(100 * (6.4 - 25 / 7) / (25 / 7))
    assert all(a <= b for a, b in zip(F, F[1:]))


def test_ranking_stops_at_max_levels(design_a, ellipsoid):
    ranking = rank_constraints(design_a, ellipsoid, max_levels=2)
    assert len(ranking) == 2 and ranking.termination == "max_levels"


def test_ranking_single_constraint():
    system = system_from_arrays(np.array([[1.0, 0.0]]), np.array([6.0]))
    ranking = rank_constraints(system, PNorm(MEAN, np.inf))
    assert len(ranking) == 1 and ranking.termination in ("unbounded", "exhausted")
    assert ranking[0].F_value == pytest.approx(2.0)


def test_ranking_merges_equal_levels():
    # two mirror constraints at the same distance form one level
    G = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0]])
    g = np.array([MEAN[0] + 1, -MEAN[0] + 1, MEAN[1] + 3])
    ranking = rank_constraints(system_from_arrays(G, g), PNorm(MEAN, np.inf))
    assert sorted(ranking[0].constraint_labels) == ["c0", "c1"]
    assert ranking[0].F_value == pytest.approx(1.0)
    assert ranking[1].constraint_labels == ["c2"] and ranking[1].F_value == pytest.approx(3.0)


def test_ranking_monotone_random():
    rng = np.random.default_rng(3)
    for _ in range(10):
        G, g, theta_bar, V = random_recourse_free(rng)
        ranking = rank_constraints(system_from_arrays(G, g), Ellipsoid(theta_bar, V))
        F = [lv.F_value for lv in ranking]
        assert all(a <= b * (1 + 1e-9) for a, b in zip(F, F[1:]))


def test_compare_rows(design_a, design_b, ellipsoid, box):
    rows = compare_designs([("A", design_a), ("B", design_b), ("A2", design_a)], [box, ellipsoid])
    assert [r["design"] for r in rows] == ["A", "B", "A2"]
    assert rows[0]["F_ellip"] == pytest.approx(25 / 7)
    assert rows[0]["alpha_star_pct"] == pytest.approx(100 * (1 - np.exp(-25 / 14)))
    assert {k: v for k, v in rows[0].items() if k != "design"} == \
        {k: v for k, v in rows[2].items() if k != "design"}
