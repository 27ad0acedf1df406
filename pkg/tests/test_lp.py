import itertools

import numpy as np
import pytest

from gapscope.errors import InfeasibleError, LinearProgramError, UnboundedError
from gapscope.lp import solve_lp


def brute_force_min(c, a_ub, b_ub):
    """Enumerate basic solutions of {A x <= b, x >= 0} and minimize c.x."""
    c = np.asarray(c, float)
    a = np.vstack([a_ub, -np.eye(c.size)])
    b = np.concatenate([b_ub, np.zeros(c.size)])
    n = c.size
    best = None
    for idx in itertools.combinations(range(len(b)), n):
        sub = a[list(idx)]
        if abs(np.linalg.det(sub)) < 1e-10:
            continue
        x = np.linalg.solve(sub, b[list(idx)])
        if np.all(a @ x <= b + 1e-9):
            val = c @ x
            if best is None or val < best:
                best = val
    return best


def test_simple_bounded():
    # min -x - y st x + y <= 1
    res = solve_lp([-1.0, -1.0], a_ub=[[1.0, 1.0]], b_ub=[1.0])
    assert res.status == "optimal"
    assert res.fun == pytest.approx(-1.0, abs=1e-9)


def test_equality_and_inequality():
    # min x1 st x1 + x2 = 2, x2 <= 1.5
    res = solve_lp([1.0, 0.0], a_ub=[[0.0, 1.0]], b_ub=[1.5], a_eq=[[1.0, 1.0]], b_eq=[2.0])
    assert res.fun == pytest.approx(0.5, abs=1e-9)
    assert res.x[1] == pytest.approx(1.5, abs=1e-9)


def test_infeasible():
    with pytest.raises(InfeasibleError):
        solve_lp([0.0], a_ub=[[1.0]], b_ub=[-1.0], a_eq=[[1.0]], b_eq=[1.0])


def test_unbounded():
    with pytest.raises(UnboundedError):
        solve_lp([-1.0, 0.0], a_ub=[[0.0, 1.0]], b_ub=[1.0])


def test_variable_cap():
    with pytest.raises(LinearProgramError):
        solve_lp(np.zeros(17), a_ub=np.zeros((1, 17)), b_ub=[1.0])


def test_degenerate_does_not_cycle():
    # Klee-Minty-flavoured degenerate instance; Bland's rule must terminate.
    a = [[1.0, 0.0], [4.0, 1.0], [8.0, 4.0]]
    b = [1.0, 4.0, 8.0]
    res = solve_lp([-4.0, -2.0], a_ub=a, b_ub=b)
    assert res.status == "optimal"


def test_matches_brute_force_on_random_instances():
    rng = np.random.RandomState(7)
    for _ in range(40):
        n = rng.randint(2, 5)
        m = rng.randint(2, 6)
        a_ub = rng.randn(m, n)
        b_ub = rng.rand(m) + 0.5  # x = 0 feasible
        c = rng.randn(n)
        oracle = brute_force_min(c, a_ub, b_ub)
        try:
            res = solve_lp(c, a_ub=a_ub, b_ub=b_ub)
        except UnboundedError:
            # Oracle enumerates vertices only; unbounded when some recession
            # direction improves. Verify by a large box probe.
            boxed = solve_lp(c, a_ub=np.vstack([a_ub, np.eye(n)]),
                             b_ub=np.concatenate([b_ub, 1e6 * np.ones(n)]))
            assert boxed.fun < (oracle if oracle is not None else 0.0) - 1e3
            continue
        assert oracle is not None
        assert res.fun == pytest.approx(oracle, abs=1e-7)
        assert np.all(a_ub @ res.x <= b_ub + 1e-7)
        assert np.all(res.x >= -1e-9)
