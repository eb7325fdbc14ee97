import numpy as np
import pytest
from scipy.optimize import linprog

from flexkit import (AffineConstraint, ConstraintFilter, GaussianSpec, LinearSystem,
                     apply_filter, psi, psi_batch, stochastic_flexibility)
from flexkit.errors import DimensionMismatch, ImpracticalTruncation, InputError
from flexkit.feasibility import sample_parameters
from conftest import COV, MEAN
from oracles import random_recourse_free, system_from_arrays


@pytest.mark.parametrize("theta, expected", [((4, 5), -4.0), ((0, 5), 0.0), ((10, 5), 1.0)])
def test_design_a_values(design_a, theta, expected):
    assert psi(design_a, theta) == pytest.approx(expected, abs=1e-12)


def test_dimension_check(design_a):
    with pytest.raises(DimensionMismatch):
        psi(design_a, [1.0])


def test_recourse_free_is_max_constraint():
    rng = np.random.default_rng(0)
    for _ in range(20):
        G, g, _, _ = random_recourse_free(rng)
        system = system_from_arrays(G, g)
        T = rng.normal(0, 3, (50, G.shape[1]))
        expected = (T @ G.T - g).max(axis=1)
        assert np.allclose(psi_batch(system, T), expected, rtol=0, atol=1e-12)
        assert psi(system, T[0]) == pytest.approx(expected[0], abs=1e-12)


def _recourse_system():
    # a two-unit plant: z1, z2 shared output must meet demand theta1, z1 bounded by theta2
    rows = (AffineConstraint("cap1", [0, -1], [1, 0], [], 0.0),
            AffineConstraint("cap2", [0, 0], [0, 1], [], 3.0),
            AffineConstraint("demand", [1, 0], [-1, -1], [], 0.0),
            AffineConstraint("z1pos", [0, 0], [-1, 0], [], 0.0),
            AffineConstraint("z2pos", [0, 0], [0, -1], [], 0.0))
    return LinearSystem(("d", "c"), ("z1", "z2"), (), rows, ())


def _psi_oracle(system, theta):
    m, nr = system.G_r.shape
    res = linprog(np.r_[np.zeros(nr), 1.0], A_ub=np.hstack([system.G_r, -np.ones((m, 1))]),
                  b_ub=system.g - system.G_theta @ theta, bounds=[(None, None)] * (nr + 1),
                  method="highs")
    return res.fun


def test_recourse_against_highs():
    system = _recourse_system()
    rng = np.random.default_rng(1)
    T = rng.uniform(0, 8, (40, 2))
    vals = psi_batch(system, T)
    for t, v in zip(T, vals):
        assert v == pytest.approx(_psi_oracle(system, t), abs=1e-9)
    assert psi(system, [4.0, 2.0]) <= 0
    assert psi(system, [6.0, 2.0]) > 0


def test_inconsistent_equalities_give_inf():
    rows = (AffineConstraint("f", [0.0], [1.0], [], 1.0),)
    eqs = (AffineConstraint("h1", [1.0], [1.0], [], 0.0), AffineConstraint("h2", [0.0], [1.0], [], 0.0))
    system = LinearSystem(("t",), ("z",), (), rows, eqs)
    assert psi(system, [1.0]) == np.inf
    assert psi(system, [0.0]) == -1.0


def test_unbounded_recourse_gives_minus_inf():
    rows = (AffineConstraint("f", [1.0], [-1.0], [], 0.0),)
    system = LinearSystem(("t",), ("z",), (), rows, ())
    assert psi(system, [3.0]) == -np.inf


def test_halfspace_at_mean_is_half():
    system = system_from_arrays(np.array([[1.0, 0.0]]), np.array([MEAN[0]]))
    est = stochastic_flexibility(system, GaussianSpec(MEAN, COV), samples=40_000, seed=3)
    assert abs(est.estimate - 0.5) <= est.half_width


def test_removal_is_monotone_with_common_draws(design_a):
    dist = GaussianSpec(MEAN, COV)
    full = stochastic_flexibility(design_a, dist, 20_000, seed=5)
    for label in ("f1", "f2", "f3", "f4"):
        reduced = apply_filter(design_a, ConstraintFilter(frozenset({label})))
        est = stochastic_flexibility(reduced, dist, 20_000, seed=5)
        assert est.estimate >= full.estimate - 1e-12


def test_half_width_formula(design_a):
    dist = GaussianSpec(MEAN, COV)
    a = stochastic_flexibility(design_a, dist, 10_000, seed=0)
    assert a.half_width == pytest.approx(1.96 * np.sqrt(a.estimate * (1 - a.estimate) / 10_000))
    # same proportion at four times the draws gives exactly half the width
    from flexkit.feasibility import half_width
    assert half_width(a.estimate, 40_000) == pytest.approx(a.half_width / 2, rel=1e-15)


def test_seed_determinism(design_a):
    dist = GaussianSpec(MEAN, COV)
    a = stochastic_flexibility(design_a, dist, 5_000, seed=11)
    b = stochastic_flexibility(design_a, dist, 5_000, seed=11)
    c = stochastic_flexibility(design_a, dist, 5_000, seed=12)
    assert a.estimate == b.estimate and a.feasible == b.feasible
    assert c.estimate != a.estimate or c.feasible == a.feasible


def test_shards_sum_counts(design_a):
    dist = GaussianSpec(MEAN, COV)
    est = stochastic_flexibility(design_a, dist, 3_000, seed=0, shards=3)
    parts = [stochastic_flexibility(design_a, dist, 1_000, seed=k) for k in range(3)]
    assert est.feasible == sum(p.feasible for p in parts)


def test_truncated_draws_nonnegative():
    draws = sample_parameters(GaussianSpec(MEAN, COV, truncated=True), 5_000, seed=0)
    assert draws.shape == (5_000, 2) and np.all(draws >= 0)


def test_impractical_truncation():
    dist = GaussianSpec([-10.0, -10.0], np.eye(2), truncated=True)
    with pytest.raises(ImpracticalTruncation):
        sample_parameters(dist, 1_000, seed=0)


def test_input_checks(design_a):
    with pytest.raises(InputError):
        stochastic_flexibility(design_a, GaussianSpec(MEAN, COV), samples=10)
    with pytest.raises(InputError):
        GaussianSpec(MEAN, [[1.0, 2.0], [2.0, 1.0]])
    with pytest.raises(DimensionMismatch):
        stochastic_flexibility(design_a, GaussianSpec([0.0], [[1.0]]), samples=100)
