import numpy as np
import pytest
from scipy.optimize import linear_sum_assignment

from lcmatch.assignment import solve_assignment
from lcmatch.errors import InfeasibleAssignment

from oracles import brute_force_assignment


@pytest.mark.parametrize("shape", [(1, 1), (1, 5), (3, 3), (4, 7), (6, 6)])
def test_matches_brute_force(rng, shape):
    for _ in range(25):
        cost = rng.random(shape)
        cols = solve_assignment(cost)
        assert len(set(cols.tolist())) == shape[0]
        _, best = brute_force_assignment(cost)
        assert cost[np.arange(shape[0]), cols].sum() == pytest.approx(best, abs=1e-12)


def test_matches_scipy_on_larger_instances(rng):
    for m, k in [(40, 60), (80, 80), (25, 200)]:
        cost = rng.random((m, k)) * 10
        cols = solve_assignment(cost)
        r, c = linear_sum_assignment(cost)
        assert cost[np.arange(m), cols].sum() == pytest.approx(cost[r, c].sum(), rel=1e-12)


def test_integer_ties_still_optimal():
    cost = np.array([[1, 1, 1], [1, 1, 1], [0, 1, 1]], dtype=float)
    cols = solve_assignment(cost)
    assert cost[np.arange(3), cols].sum() == 2


def test_more_rows_than_columns():
    with pytest.raises(InfeasibleAssignment):
        solve_assignment(np.ones((3, 2)))
