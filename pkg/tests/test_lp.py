from fractions import Fraction

import numpy as np
import pytest
from scipy.optimize import linprog

from ctab import lp


def random_lp(rng, m, n):
    A = rng.integers(-3, 4, size=(m, n)).astype(float)
    # a row of ones keeps the region bounded
    A = np.vstack([A, np.ones(n)])
    x0 = rng.integers(0, 4, size=n).astype(float)
    b = A @ x0
    c = rng.integers(-5, 6, size=n).astype(float)
    return c, A, b


@pytest.mark.parametrize("seed", range(40))
def test_float_simplex_matches_linprog(seed):
    rng = np.random.default_rng(seed)
    c, A, b = random_lp(rng, rng.integers(1, 5), rng.integers(3, 9))
    for maximize in (False, True):
        ours = lp.solve(c, A, b, maximize=maximize)
        ref = linprog(-c if maximize else c, A_eq=A, b_eq=b, bounds=(0, None), method="highs")
        assert ours.ok and ref.status == 0
        val = -ref.fun if maximize else ref.fun
        assert ours.value == pytest.approx(val, abs=1e-8)
        assert np.allclose(A @ ours.x, b, atol=1e-8) and ours.x.min() >= -1e-9


@pytest.mark.parametrize("seed", range(15))
def test_exact_simplex_matches_linprog(seed):
    rng = np.random.default_rng(100 + seed)
    c, A, b = random_lp(rng, rng.integers(1, 4), rng.integers(3, 7))
    solver = lp.ExactSimplex(A.astype(int).tolist(), b.astype(int).tolist())
    assert solver.feasible
    for maximize in (False, True):
        status, x, val = solver.optimize(c.astype(int).tolist(), maximize=maximize)
        ref = linprog(-c if maximize else c, A_eq=A, b_eq=b, bounds=(0, None), method="highs")
        assert status == "optimal"
        assert all(isinstance(v, Fraction) for v in x)
        assert float(val) == pytest.approx(-ref.fun if maximize else ref.fun, abs=1e-8)
        # exact feasibility
        for row, rhs in zip(A.astype(int).tolist(), b.astype(int).tolist()):
            assert sum(Fraction(a) * v for a, v in zip(row, x)) == rhs


def test_solve_many_agrees_with_single_solves():
    rng = np.random.default_rng(7)
    _, A, b = random_lp(rng, 3, 6)
    C = rng.normal(size=(5, 6))
    many = lp.solve_many(C, A, b, maximize=True)
    for c, r in zip(C, many):
        assert r.value == pytest.approx(lp.solve(c, A, b, maximize=True).value, abs=1e-9)


def test_infeasible_and_unbounded():
    A = np.array([[1.0, 1.0]])
    assert lp.solve([1, 0], A, [-1.0]).status == "infeasible"
    assert not lp.is_feasible(A, [-1.0])
    assert lp.solve([1, 0], np.array([[1.0, -1.0]]), [0.0], maximize=True).status == "unbounded"
    assert not lp.ExactSimplex([[1, 1]], [-1]).feasible


def test_degenerate_problem_terminates():
    # classic cycling example under Dantzig's rule, in equality form with slacks
    A = np.array([
        [0.5, -5.5, -2.5, 9, 1, 0, 0],
        [0.5, -1.5, -0.5, 1, 0, 1, 0],
        [1, 0, 0, 0, 0, 0, 1],
    ])
    b = np.array([0, 0, 1.0])
    c = np.array([-10, 57, 9, 24, 0, 0, 0.0])
    r = lp.solve(c, A, b)
    assert r.ok and r.value == pytest.approx(-1.0, abs=1e-9)
    status, _, val = lp.ExactSimplex(
        [[Fraction(1, 2), Fraction(-11, 2), Fraction(-5, 2), 9, 1, 0, 0],
         [Fraction(1, 2), Fraction(-3, 2), Fraction(-1, 2), 1, 0, 1, 0],
         [1, 0, 0, 0, 0, 0, 1]], [0, 0, 1]).optimize([-10, 57, 9, 24, 0, 0, 0])
    assert status == "optimal" and val == -1
