import numpy as np
import pytest

from flexkit.errors import NoInteriorPoint
from flexkit.solvers import newton_barrier_max


def test_unit_box_center():
    A = np.array([[1.0], [-1.0]])
    v = newton_barrier_max(A, [1.0, 0.0])
    assert v[0] == pytest.approx(0.5, abs=1e-10)


def test_design_a_first_order_conditions():
    A = np.array([[1, 1], [1, -2], [-1, 0], [0, -1.0]])
    b = np.array([14, 2, 0, 0.0])
    v = newton_barrier_max(A, b)
    s = b - A @ v
    assert np.all(s > 0)
    assert np.linalg.norm(A.T @ (1 / s)) <= 1e-8
    assert v == pytest.approx([2.88546, 7.48573], abs=1e-5)


def test_equality_constraint_respected():
    A = np.vstack([np.eye(2), -np.eye(2)])
    b = np.array([1.0, 1.0, 0.0, 0.0])
    v = newton_barrier_max(A, b, E=[[1.0, 1.0]], e=[0.5])
    assert v.sum() == pytest.approx(0.5)
    assert v == pytest.approx([0.25, 0.25], abs=1e-9)


def test_empty_interior():
    A = np.array([[1.0], [-1.0]])
    with pytest.raises(NoInteriorPoint):
        newton_barrier_max(A, [0.0, 0.0])
    with pytest.raises(NoInteriorPoint):
        newton_barrier_max(A, [-1.0, 0.0])
