import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cogaction.action import Trajectory
from cogaction.errors import InputError
from cogaction.metrics import h1_distance, l2_distance, sup_distance


def test_identical_and_constant():
    a = Trajectory(np.zeros(11), 1.0)
    assert h1_distance(a, a) == 0.0
    b = Trajectory(np.full(11, -2.5), 1.0)
    assert h1_distance(a, b) == pytest.approx(2.5, rel=1e-15)
    assert l2_distance(a, b) == pytest.approx(2.5, rel=1e-15)


def test_grid_mismatch():
    with pytest.raises(InputError):
        h1_distance(Trajectory(np.zeros(11), 1.0), Trajectory(np.zeros(12), 1.0))
    with pytest.raises(InputError):
        h1_distance(Trajectory(np.zeros(11), 1.0), Trajectory(np.zeros(11), 2.0))


def test_sup_window():
    a = Trajectory(np.zeros(11), 1.0)
    b = Trajectory(np.linspace(0, 1, 11), 1.0)
    assert sup_distance(a, b) == 1.0
    assert sup_distance(a, b, (0.0, 0.5)) == pytest.approx(0.5)
    with pytest.raises(InputError):
        sup_distance(a, b, (0.01, 0.02))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_metric_axioms(seed):
    rng = np.random.default_rng(seed)
    a, b, c = (Trajectory(rng.normal(size=(21, 2)), 2.0) for _ in range(3))
    assert h1_distance(a, b) == h1_distance(b, a)
    assert h1_distance(a, c) <= h1_distance(a, b) + h1_distance(b, c) + 1e-12
    assert h1_distance(a, b) > 0
