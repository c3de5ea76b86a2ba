import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from linregions.counting import count_bruteforce, count_exact, count_sampled
from linregions.formulation import Stability, region_lp, tighten_bounds
from linregions.lp import LpStatus, solve_lp
from linregions.model import InputBox, Layer, NetworkModel, generate_random_network

from suites import network_suite


def _two_unit():
    return NetworkModel((Layer(np.array([[1.0], [-1.0]]), np.zeros(2)),),
                        InputBox([-1.0], [1.0]))


def test_zero_network_has_one_region():
    net = generate_random_network([3, 2], 2, seed=0, scale=0.0)
    ub = tighten_bounds(net, "milp")
    assert count_exact(net, ub).count == 1
    assert count_bruteforce(net, ub).count == 1


def test_two_unit_net():
    net = _two_unit()
    ub = tighten_bounds(net, "milp")
    exact = count_exact(net, ub)
    brute = count_bruteforce(net, ub)
    assert exact.count == brute.count == 3
    assert {p.to_string() for p in brute.patterns} == {"10", "01", "00"}
    assert count_exact(net, ub, full_dim=True).count == 2


def test_stable_active_unit_is_always_on():
    net = NetworkModel((Layer(np.array([[1.0], [1.0]]), np.array([5.0, -0.5])),),
                       InputBox([0.0], [1.0]))
    ub = tighten_bounds(net, "milp")
    assert ub.stability[0][0] is Stability.STABLY_ACTIVE
    res = count_bruteforce(net, ub)
    assert res.count <= 2
    assert all(p.layers[0][0] == 1 for p in res.patterns)


def test_seed_42_single_layer():
    net = generate_random_network([8], 2, seed=42)
    ub = tighten_bounds(net, "milp")
    assert count_exact(net, ub).count == count_bruteforce(net, ub).count


def test_generator_example_widths_10():
    net = generate_random_network([10], 2, seed=1)
    ub = tighten_bounds(net, "milp")
    assert count_exact(net, ub).count == count_bruteforce(net, ub).count


@pytest.mark.parametrize("full_dim", [False, True])
def test_oracle_equivalence_on_suite(full_dim):
    for _, net, ub in network_suite(20):
        exact = count_exact(net, ub, full_dim=full_dim)
        brute = count_bruteforce(net, ub, full_dim=full_dim)
        assert exact.count == brute.count
        assert {p.flat() for p in exact.patterns} == {p.flat() for p in brute.patterns}


def test_retained_patterns_are_distinct_and_feasible():
    for _, net, ub in network_suite(10):
        res = count_exact(net, ub)
        assert len({p.flat() for p in res.patterns}) == res.count
        for p in res.patterns:
            assert solve_lp(region_lp(net, p)).status is LpStatus.OPTIMAL
            for l, st_l in enumerate(ub.stability):
                for i, s in enumerate(st_l):
                    if s is Stability.STABLY_ACTIVE:
                        assert p.layers[l][i] == 1
                    if s is Stability.STABLY_INACTIVE:
                        assert p.layers[l][i] == 0


def test_sampling_is_a_lower_bound():
    for _, net, ub in network_suite(10):
        assert count_sampled(net, 10_000, seed=3) <= count_exact(net, ub).count


@settings(max_examples=10, deadline=None)
@given(st.integers(1, 40))
def test_limit_truncation(m):
    _, net, ub = network_suite(10)[7]
    exact = count_exact(net, ub).count
    res = count_exact(net, ub, limit=m)
    assert res.count == min(m, exact)
    if m < exact:
        assert res.truncated


def test_methods_agree_on_count():
    for _, net, _ in network_suite(8):
        counts = {m: count_exact(net, tighten_bounds(net, m)).count
                  for m in ("interval", "lp", "milp")}
        assert len(set(counts.values())) == 1


def test_bruteforce_cap():
    net = generate_random_network([30], 3, seed=0, domain=InputBox([-1] * 3, [1] * 3))
    ub = tighten_bounds(net, "interval")
    with pytest.raises(ValueError):
        count_bruteforce(net, ub)
