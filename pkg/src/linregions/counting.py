"""Exact linear-region counting and a brute-force oracle."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .formulation import (DEFAULT_EPS, Stability, UnitBounds, build_counting_milp)
from .lp import LinearProgram, LpStatus, solve_lp
from .milp import DEFAULT_NODE_LIMIT, enumerate_solutions
from .model import ActivationPattern, NetworkModel

PATTERN_RETENTION_CAP = 10**5
BRUTEFORCE_MAX_UNSTABLE = 24


@dataclass
class CountResult:
    count: int
    truncated: bool = False
    patterns: list[ActivationPattern] | None = None
    elapsed: float = 0.0
    nodes: int = 0
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"count": self.count, "truncated": self.truncated,
                "elapsed": self.elapsed, "nodes": self.nodes}


def count_exact(net: NetworkModel, ub: UnitBounds, eps: float = DEFAULT_EPS,
                limit: int | None = None, *, with_valid_inequalities: bool = False,
                full_dim: bool = False, keep_patterns: bool | None = None,
                node_limit: int = DEFAULT_NODE_LIMIT,
                time_limit: float | None = None) -> CountResult:
    """Number of activation patterns, by enumerating the counting MILP's binary projections.

    Patterns are kept unless more than ``PATTERN_RETENTION_CAP`` are found
    (override with ``keep_patterns``). On a limit, ``truncated`` is set and
    ``count`` is a lower bound.
    """
    start = time.monotonic()
    cm = build_counting_milp(net, ub, eps, with_valid_inequalities, full_dim)
    res = enumerate_solutions(cm.milp, cm.binaries, limit, node_limit=node_limit,
                              time_limit=time_limit)
    count = res.count
    keep = count <= PATTERN_RETENTION_CAP if keep_patterns is None else keep_patterns
    patterns = sorted((cm.pattern_from_key(k) for k in res.solutions),
                      key=lambda p: p.flat()) if keep else None
    return CountResult(count, res.truncated, patterns, time.monotonic() - start, res.nodes)


def count_bruteforce(net: NetworkModel, ub: UnitBounds, eps: float = DEFAULT_EPS,
                     full_dim: bool = False, keep_patterns: bool = True) -> CountResult:
    """Test every assignment of the unstable units for a realising input.

    Units are fixed layer by layer; a prefix whose input-space LP is already
    infeasible prunes all of its completions. Stable units follow their
    classification. Each feasibility check is a small LP over ``x`` alone,
    independent of the big-M model.
    """
    n_unstable = ub.n_unstable
    if n_unstable > BRUTEFORCE_MAX_UNSTABLE:
        raise ValueError(f"{n_unstable} unstable units exceed the brute-force cap "
                         f"of {BRUTEFORCE_MAX_UNSTABLE}")
    start = time.monotonic()
    order = [(l, i) for l in range(net.depth) for i in range(net.widths[l])]
    base_bits = [[1 if s is Stability.STABLY_ACTIVE else 0 for s in st] for st in ub.stability]
    found = []
    checks = 0
    inactive_rhs = -eps if full_dim else 0.0

    def rows_for(bits, upto_layer, upto_unit):
        """Constraint rows (A, sense, rhs) for units fixed so far, in layer-major order."""
        A_h = np.eye(net.input_dim)
        c_h = np.zeros(net.input_dim)
        rows = []
        for l in range(upto_layer + 1):
            layer = net.layers[l]
            A_g = layer.weights @ A_h
            c_g = layer.weights @ c_h + layer.bias
            last = upto_unit if l == upto_layer else layer.width - 1
            for i in range(last + 1):
                if bits[l][i]:
                    rows.append((A_g[i], ">=", eps - c_g[i]))
                elif full_dim or ub.stability[l][i] is not Stability.STABLY_INACTIVE:
                    rows.append((A_g[i], "<=", inactive_rhs - c_g[i]))
            mask = np.array(bits[l], dtype=float)
            A_h = A_g * mask[:, None]
            c_h = c_g * mask
        return rows

    def feasible(bits, l, i):
        nonlocal checks
        checks += 1
        lp = LinearProgram()
        for k in range(net.input_dim):
            lp.add_variable(net.domain.lower[k], net.domain.upper[k])
        for a, sense, rhs in rows_for(bits, l, i):
            lp.add_row(list(a), sense, rhs)
        return solve_lp(lp).status is LpStatus.OPTIMAL

    bits = [list(b) for b in base_bits]

    def dfs(pos):
        if pos == len(order):
            found.append(ActivationPattern(tuple(tuple(b) for b in bits)))
            return
        l, i = order[pos]
        if ub.stability[l][i] is not Stability.UNSTABLE:
            if feasible(bits, l, i):
                dfs(pos + 1)
            return
        for v in (0, 1):
            bits[l][i] = v
            if feasible(bits, l, i):
                dfs(pos + 1)
        bits[l][i] = 0

    dfs(0)
    return CountResult(len(found), False, found if keep_patterns else None,
                       time.monotonic() - start, checks)


def count_sampled(net: NetworkModel, n_samples: int = 10_000, seed: int = 0) -> int:
    """Distinct patterns seen at uniformly sampled inputs (a lower bound on the count)."""
    from .model import forward_batch

    rng = np.random.default_rng(seed)
    X = rng.uniform(net.domain.lower, net.domain.upper, size=(n_samples, net.input_dim))
    return len(np.unique(forward_batch(net, X), axis=0))
