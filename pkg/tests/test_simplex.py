"""Dense two-phase simplex on hand-checkable programs."""
import numpy as np
import pytest

import safemdp as sm
from safemdp.simplex import solve_min


def test_bounded_two_variable():
    # min -x - y  s.t.  x + 2y <= 4, 3x + y <= 6
    res = solve_min(
        np.array([-1.0, -1.0]),
        np.array([[1.0, 2.0], [3.0, 1.0]]),
        np.array([4.0, 6.0]),
    )
    assert np.allclose(res.x, [8 / 5, 6 / 5], atol=1e-9)
    assert res.objective == pytest.approx(-14 / 5, abs=1e-9)


def test_slack_only_optimum():
    # Origin is already optimal when costs are nonnegative.
    res = solve_min(np.array([2.0, 1.0]), np.array([[1.0, 1.0]]), np.array([3.0]))
    assert np.allclose(res.x, [0.0, 0.0], atol=0)
    assert res.objective == 0.0


def test_phase_one_negative_rhs():
    # min x  s.t.  -x <= -2  forces x = 2 through an artificial start.
    res = solve_min(np.array([1.0]), np.array([[-1.0]]), np.array([-2.0]))
    assert res.x[0] == pytest.approx(2.0, abs=1e-9)


def test_equality_built_from_two_rows():
    # x + y = 1 encoded as a pair of opposite inequalities; min x.
    res = solve_min(
        np.array([1.0, 0.0]),
        np.array([[1.0, 1.0], [-1.0, -1.0]]),
        np.array([1.0, -1.0]),
    )
    assert res.x[0] == pytest.approx(0.0, abs=1e-9)
    assert res.x[1] == pytest.approx(1.0, abs=1e-9)


def test_unbounded_detected():
    with pytest.raises(sm.LpUnboundedError):
        solve_min(np.array([-1.0]), np.array([[-1.0]]), np.array([1.0]))


def test_infeasible_detected():
    # x <= 1 and x >= 2 cannot both hold.
    with pytest.raises(sm.LpInfeasibleError):
        solve_min(
            np.array([1.0]), np.array([[1.0], [-1.0]]), np.array([1.0, -2.0])
        )


def test_degenerate_vertex_terminates():
    """Three constraints meet at (1, 0); Bland's rule must not cycle."""
    res = solve_min(
        np.array([-1.0, 0.0]),
        np.array([[1.0, 0.0], [1.0, 1.0], [1.0, -1.0]]),
        np.array([1.0, 1.0, 1.0]),
    )
    assert res.x[0] == pytest.approx(1.0, abs=1e-9)
    assert res.objective == pytest.approx(-1.0, abs=1e-9)


def test_redundant_rows_tolerated():
    rows = np.array([[1.0, 1.0], [1.0, 1.0], [2.0, 2.0]])
    res = solve_min(np.array([-1.0, -2.0]), rows, np.array([1.0, 1.0, 2.0]))
    assert res.objective == pytest.approx(-2.0, abs=1e-9)
    assert res.x[1] == pytest.approx(1.0, abs=1e-9)


def test_solution_satisfies_constraints():
    rng = np.random.default_rng(3)
    for _ in range(20):
        n, k = 4, 6
        A = rng.normal(size=(k, n))
        b = rng.uniform(0.5, 2.0, size=k)
        c = rng.normal(size=n)
        try:
            res = solve_min(c, A, b)
        except sm.LpUnboundedError:
            continue
        assert (A @ res.x <= b + 1e-8).all()
        assert (res.x >= -1e-12).all()
        assert res.iterations >= 0
