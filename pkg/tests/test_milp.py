import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from linregions.lp import LinearProgram, LpStatus, Row, solve_lp
from linregions.milp import (MilpModel, MilpStatus, NodeLimitError, enumerate_solutions,
                             solve_milp)


def _free_cube(n):
    lp = LinearProgram()
    for _ in range(n):
        lp.add_variable(0, 1)
    return MilpModel(lp, range(n))


def test_single_binary_max():
    lp = LinearProgram()
    z = lp.add_variable(0, 1)
    lp.set_objective({z: 1.0}, maximize=True)
    res = solve_milp(MilpModel(lp, [z]))
    assert res.status is MilpStatus.OPTIMAL
    assert res.x[z] == pytest.approx(1.0)


def test_packing_objective_one():
    lp = LinearProgram()
    a, b = lp.add_variable(0, 1), lp.add_variable(0, 1)
    lp.add_row({a: 1.0, b: 1.0}, "<=", 1.0)
    lp.set_objective({a: 1.0, b: 1.0}, maximize=True)
    assert solve_milp(MilpModel(lp, [a, b])).objective == pytest.approx(1.0)


def test_binary_bounds_validated():
    lp = LinearProgram()
    lp.add_variable(0, 2)
    with pytest.raises(ValueError):
        MilpModel(lp, [0])


@pytest.mark.parametrize("n", [1, 3, 5])
def test_no_good_callback_visits_every_vertex(n):
    seen = []

    def no_good(x):
        bits = tuple(int(round(x[j])) for j in range(n))
        seen.append(bits)
        ones = [j for j in range(n) if bits[j]]
        vals = [1.0 if bits[j] else -1.0 for j in range(n)]
        return [Row(tuple(range(n)), tuple(vals), "<=", len(ones) - 1)]

    res = solve_milp(_free_cube(n), no_good)
    assert res.status is MilpStatus.INFEASIBLE
    assert len(seen) == 2**n
    assert len(set(seen)) == 2**n


def test_cuts_respected_by_returned_solution():
    lp = LinearProgram()
    zs = [lp.add_variable(0, 1) for _ in range(4)]
    lp.set_objective({z: 1.0 for z in zs}, maximize=True)
    calls = []

    def cap(x):
        calls.append(1)
        if sum(x[z] for z in zs) > 2.5:
            return [Row(tuple(zs), (1.0,) * 4, "<=", 2.0)]
        return None

    res = solve_milp(MilpModel(lp, zs), cap)
    assert res.objective == pytest.approx(2.0)
    assert all(c.satisfied(res.x) for c in res.cuts)


def test_enumerate_packing():
    lp = LinearProgram()
    a, b = lp.add_variable(0, 1), lp.add_variable(0, 1)
    lp.add_row({a: 1.0, b: 1.0}, "<=", 1.0)
    res = enumerate_solutions(MilpModel(lp, [a, b]))
    assert res.solutions == {(0, 0), (0, 1), (1, 0)}
    assert not res.truncated


def test_enumerate_cube():
    assert enumerate_solutions(_free_cube(3)).count == 8


def test_enumerate_limit_truncates():
    res = enumerate_solutions(_free_cube(4), limit=5)
    assert res.count == 5
    assert res.truncated
    assert enumerate_solutions(_free_cube(2), limit=10).count == 4


def test_enumerate_respects_objective_threshold():
    lp = LinearProgram()
    zs = [lp.add_variable(0, 1) for _ in range(3)]
    lp.set_objective({z: 1.0 for z in zs}, maximize=True)
    res = enumerate_solutions(MilpModel(lp, zs, eps_obj=2.0))
    assert res.solutions == {k for k in itertools.product((0, 1), repeat=3) if sum(k) >= 2}


def test_node_limit():
    lp = LinearProgram()
    zs = [lp.add_variable(0, 1) for _ in range(8)]
    lp.add_row({z: 2.0 for z in zs}, "=", 7.0)
    lp.set_objective({z: 1.0 for z in zs}, maximize=True)
    with pytest.raises(NodeLimitError):
        solve_milp(MilpModel(lp, zs), node_limit=3)


def _random_mixed(seed, nb, nc, m):
    rng = np.random.default_rng(seed)
    lp = LinearProgram()
    zs = [lp.add_variable(0, 1) for _ in range(nb)]
    for _ in range(nc):
        lp.add_variable(-1, 2)
    n = nb + nc
    for _ in range(m):
        lp.add_row(list(rng.normal(size=n).round(2)), "<=", float(rng.uniform(0, 2)))
    lp.set_objective(list(rng.normal(size=n).round(2)), maximize=True)
    return lp, zs


def _brute_force(lp, zs):
    best, feasible = None, set()
    for bits in itertools.product((0.0, 1.0), repeat=len(zs)):
        sub = lp.copy()
        for z, v in zip(zs, bits):
            sub.set_bounds(z, v, v)
        sol = solve_lp(sub)
        if sol.status is LpStatus.OPTIMAL:
            feasible.add(tuple(int(v) for v in bits))
            best = sol.objective if best is None else max(best, sol.objective)
    return best, feasible


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 6), st.integers(0, 3), st.integers(1, 5))
def test_milp_matches_brute_force(seed, nb, nc, m):
    lp, zs = _random_mixed(seed, nb, nc, m)
    best, feasible = _brute_force(lp, zs)
    res = solve_milp(MilpModel(lp, zs))
    if best is None:
        assert res.status is MilpStatus.INFEASIBLE
    else:
        assert res.status is MilpStatus.OPTIMAL
        assert res.objective == pytest.approx(best, abs=1e-6)
        assert lp.is_feasible(res.x, tol=1e-6)
    assert enumerate_solutions(MilpModel(lp, zs)).solutions == feasible


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 6))
def test_projection_enumeration_is_order_independent(seed, nb):
    lp, zs = _random_mixed(seed, nb, 2, 3)
    full = enumerate_solutions(MilpModel(lp, zs)).solutions
    proj = list(reversed(zs[: nb // 2 + 1]))
    got = enumerate_solutions(MilpModel(lp, zs), proj).solutions
    assert got == {tuple(k[zs.index(j)] for j in proj) for k in full}
