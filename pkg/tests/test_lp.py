import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import linprog

from linregions.lp import INF, LinearProgram, LpStatus, Row, Tableau, solve_lp


def _lp_1d(upper_row):
    lp = LinearProgram()
    x = lp.add_variable(0.0, INF)
    lp.add_row({x: 1.0}, "<=", upper_row)
    lp.set_objective({x: 1.0}, maximize=True)
    return lp


def test_max_x_bounded():
    sol = solve_lp(_lp_1d(3.0))
    assert sol.status is LpStatus.OPTIMAL
    assert sol.x[0] == pytest.approx(3.0)


def test_max_x_infeasible():
    assert solve_lp(_lp_1d(-1.0)).status is LpStatus.INFEASIBLE


def test_unbounded():
    lp = LinearProgram()
    x = lp.add_variable(0.0, INF)
    lp.set_objective({x: 1.0}, maximize=True)
    assert solve_lp(lp).status is LpStatus.UNBOUNDED


def test_square_objective_one():
    lp = LinearProgram()
    x, y = lp.add_variable(0, 1), lp.add_variable(0, 1)
    lp.add_row({x: 1.0, y: 1.0}, "<=", 1.0)
    lp.set_objective({x: 1.0, y: 1.0}, maximize=True)
    sol = solve_lp(lp)
    assert sol.objective == pytest.approx(1.0)
    # vertex enumeration of the triangle (0,0), (1,0), (0,1)
    assert max(a + b for a, b in [(0, 0), (1, 0), (0, 1)]) == 1


def test_add_row_keeps_optimum():
    lp = LinearProgram()
    x = lp.add_variable(-INF, INF)
    lp.add_row({x: 1.0}, "<=", 1.0)
    lp.set_objective({x: 1.0}, maximize=True)
    lp.add_row({x: 1.0}, ">=", 0.5)
    assert solve_lp(lp).x[0] == pytest.approx(1.0)


def test_add_then_remove_restores():
    lp = LinearProgram()
    x = lp.add_variable(0, INF)
    lp.add_row({x: 1.0}, "<=", 1.0)
    lp.set_objective({x: 1.0}, maximize=True)
    k = lp.add_row({x: 1.0}, "<=", 0.2)
    assert solve_lp(lp).objective == pytest.approx(0.2)
    lp.remove_rows([k])
    assert solve_lp(lp).objective == pytest.approx(1.0)


def test_conflicting_rows_infeasible():
    lp = LinearProgram()
    x = lp.add_variable(-INF, INF)
    lp.add_row({x: 1.0}, ">=", 2.0)
    lp.add_row({x: 1.0}, "<=", 1.0)
    assert solve_lp(lp).status is LpStatus.INFEASIBLE


def test_row_length_mismatch():
    lp = LinearProgram(2)
    with pytest.raises(ValueError):
        lp.add_row([1.0, 2.0, 3.0], "<=", 1.0)


def test_bad_sense():
    with pytest.raises(ValueError):
        Row((0,), (1.0,), "<", 1.0)


def test_equality_and_free_variables():
    lp = LinearProgram()
    x, y = lp.add_variable(-INF, INF), lp.add_variable(-INF, INF)
    lp.add_row({x: 1.0, y: 1.0}, "=", 2.0)
    lp.add_row({x: 1.0, y: -1.0}, "=", 0.0)
    lp.set_objective({x: 1.0}, maximize=False)
    sol = solve_lp(lp)
    assert sol.status is LpStatus.OPTIMAL
    np.testing.assert_allclose(sol.x, [1.0, 1.0], atol=1e-9)


def test_degenerate_cycling_example_terminates():
    # Beale's classic cycling instance for Dantzig pricing
    lp = LinearProgram()
    v = [lp.add_variable(0, INF) for _ in range(4)]
    lp.add_row(dict(zip(v, [0.25, -60, -1 / 25, 9])), "<=", 0)
    lp.add_row(dict(zip(v, [0.5, -90, -1 / 50, 3])), "<=", 0)
    lp.add_row({v[2]: 1.0}, "<=", 1)
    lp.set_objective(dict(zip(v, [-0.75, 150, -1 / 50, 6])), maximize=False)
    sol = solve_lp(lp)
    assert sol.status is LpStatus.OPTIMAL
    assert sol.objective == pytest.approx(-0.05)


def _vertex_optimum(A, b, c, lo, hi):
    """Brute-force over all bases of the box-and-row system (small n only)."""
    n = len(c)
    G = np.vstack([A, np.eye(n), -np.eye(n)])
    h = np.concatenate([b, hi, -lo])
    best = None
    for idx in itertools.combinations(range(len(G)), n):
        M = G[list(idx)]
        if abs(np.linalg.det(M)) < 1e-10:
            continue
        x = np.linalg.solve(M, h[list(idx)])
        if np.all(G @ x <= h + 1e-8):
            val = c @ x
            best = val if best is None else max(best, val)
    return best


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 4), st.integers(1, 5))
def test_random_lp_matches_vertex_enumeration(seed, n, m):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(m, n))
    b = rng.uniform(0.1, 2.0, size=m)
    c = rng.normal(size=n)
    lo, hi = -rng.uniform(0, 2, n), rng.uniform(0, 2, n)
    lp = LinearProgram()
    for j in range(n):
        lp.add_variable(lo[j], hi[j])
    for i in range(m):
        lp.add_row(list(A[i]), "<=", b[i])
    lp.set_objective(list(c), maximize=True)
    sol = solve_lp(lp)
    ref = _vertex_optimum(A, b, c, lo, hi)
    assert sol.status is LpStatus.OPTIMAL
    assert sol.objective == pytest.approx(ref, abs=1e-6)
    assert lp.is_feasible(sol.x)


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 12), st.integers(1, 10))
def test_random_lp_matches_highs(seed, n, m):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(m, n)).round(2)
    b = rng.normal(size=m).round(2)
    senses = rng.choice(["<=", ">=", "="], size=m, p=[0.45, 0.45, 0.1])
    c = rng.normal(size=n).round(2)
    lo = np.where(rng.random(n) < 0.2, -INF, -rng.uniform(0, 3, n).round(2))
    hi = np.where(rng.random(n) < 0.2, INF, rng.uniform(0, 3, n).round(2))
    lp = LinearProgram()
    for j in range(n):
        lp.add_variable(lo[j], hi[j])
    for i in range(m):
        lp.add_row(list(A[i]), senses[i], b[i])
    lp.set_objective(list(c), maximize=False)
    sol = solve_lp(lp)
    ub_rows = [i for i in range(m) if senses[i] != "="]
    eq_rows = [i for i in range(m) if senses[i] == "="]
    sgn = np.array([1.0 if senses[i] == "<=" else -1.0 for i in ub_rows])
    ref = linprog(c, A_ub=(A[ub_rows] * sgn[:, None]) if ub_rows else None,
                  b_ub=(b[ub_rows] * sgn) if ub_rows else None,
                  A_eq=A[eq_rows] if eq_rows else None, b_eq=b[eq_rows] if eq_rows else None,
                  bounds=list(zip([None if v == -INF else v for v in lo],
                                  [None if v == INF else v for v in hi])),
                  method="highs")
    if sol.status is LpStatus.OPTIMAL:
        assert lp.is_feasible(sol.x)
        if ref.status == 0:
            assert sol.objective == pytest.approx(ref.fun, rel=1e-6, abs=1e-6)
    if ref.status == 0:
        assert sol.status is LpStatus.OPTIMAL
    elif ref.status == 2 and sol.status is not LpStatus.INFEASIBLE:
        # HiGHS presolve can report infeasible for unbounded models; confirm our point
        assert lp.is_feasible(sol.x if sol.x is not None else np.zeros(n)) or \
            sol.status is LpStatus.UNBOUNDED
    elif ref.status == 3:
        assert sol.status is LpStatus.UNBOUNDED


def test_tableau_warm_start_matches_cold():
    rng = np.random.default_rng(5)
    lp = LinearProgram()
    for _ in range(6):
        lp.add_variable(0, 1)
    for _ in range(4):
        lp.add_row(list(rng.normal(size=6)), "<=", 1.0)
    lp.set_objective(list(rng.normal(size=6)), maximize=True)
    tab = Tableau(lp)
    assert tab.solve() is LpStatus.OPTIMAL
    extra = Row((0, 1, 2), (1.0, 1.0, 1.0), "<=", 0.5)
    warm = tab.copy()
    warm.add_row(extra)
    warm.fix(3, 0.0)
    assert warm.solve() is LpStatus.OPTIMAL
    cold_lp = lp.copy()
    cold_lp.add_row(extra)
    cold_lp.set_bounds(3, 0.0, 0.0)
    assert warm.objective() == pytest.approx(solve_lp(cold_lp).objective, abs=1e-9)
    # the parent tableau is untouched by edits to the copy
    assert tab.n_rows == 4
