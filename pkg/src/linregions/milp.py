"""Depth-first branch-and-bound over 0-1 variables.

Nodes carry a warm tableau; the child whose fixing agrees with the
parent's LP point inherits that point without pivoting. Cuts returned
by an incumbent callback are global: they are appended to every node
that is (re)visited afterwards.
"""

from __future__ import annotations

import enum
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .lp import TOL_INT, LinearProgram, LpStatus, Row, Tableau

DEFAULT_NODE_LIMIT = 10**7

IncumbentCallback = Callable[[np.ndarray], Iterable[Row] | None]


class MilpStatus(str, enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


class SearchLimitError(RuntimeError):
    """Node or time limit hit.

    ``bound`` is the best proven objective bound in the caller's sense, or
    None if nothing is known yet.
    """

    def __init__(self, message, bound=None, incumbent=None, nodes=0):
        super().__init__(message)
        self.bound = bound
        self.incumbent = incumbent
        self.nodes = nodes


class NodeLimitError(SearchLimitError):
    pass


class TimeLimitError(SearchLimitError):
    pass


@dataclass
class MilpModel:
    lp: LinearProgram
    binaries: Sequence[int]
    eps_obj: float | None = None

    def __post_init__(self):
        self.binaries = tuple(int(j) for j in self.binaries)
        for j in self.binaries:
            if not 0 <= j < self.lp.n_vars:
                raise ValueError(f"binary index {j} out of range")
            if self.lp.lower[j] < 0 or self.lp.upper[j] > 1:
                raise ValueError(f"binary variable {j} must be bounded within [0, 1]")

    def root_tableau(self) -> Tableau:
        lp = self.lp
        if self.eps_obj is not None:
            lp = lp.copy()
            coeffs = {j: c for j, c in enumerate(lp.cost) if c != 0}
            lp.add_row(Row.from_mapping(coeffs, ">=", self.eps_obj - lp.offset))
        return Tableau(lp)

    def free_binaries(self) -> tuple[int, ...]:
        return tuple(j for j in self.binaries if self.lp.lower[j] != self.lp.upper[j])


@dataclass
class MilpResult:
    status: MilpStatus
    x: np.ndarray | None = None
    objective: float | None = None
    nodes: int = 0
    cuts: list[Row] = field(default_factory=list)
    incumbents_seen: int = 0


@dataclass
class EnumerationResult:
    solutions: set
    truncated: bool
    nodes: int

    @property
    def count(self) -> int:
        return len(self.solutions)


@dataclass
class _Node:
    tab: Tableau
    n_cuts: int
    parent_obj: float


def _branch_var(x: np.ndarray, binaries: Sequence[int]) -> int:
    """Most fractional binary, ties by lowest index; -1 if all integral."""
    best, best_frac = -1, TOL_INT
    for j in binaries:
        v = x[j]
        f = abs(v - round(v))
        if f > best_frac + 1e-12:
            best, best_frac = j, f
    return best


def _children(tab: Tableau, j: int, n_cuts: int, obj: float) -> list[_Node]:
    """Both children of a node; the one nearer the LP value comes last (popped first)."""
    near = 1.0 if tab.x[j] >= 0.5 else 0.0
    far_tab = tab.copy()
    far_tab.fix(j, 1.0 - near)
    tab.fix(j, near)
    return [_Node(far_tab, n_cuts, obj), _Node(tab, n_cuts, obj)]


def solve_milp(model: MilpModel, callback: IncumbentCallback | None = None, *,
               node_limit: int = DEFAULT_NODE_LIMIT, time_limit: float | None = None,
               feasibility: bool = False) -> MilpResult:
    """Branch-and-bound with lazy cuts.

    ``callback`` is invoked on every integer-feasible LP solution; any rows it
    returns become global cuts. An incumbent violated by new cuts is dropped
    (and nodes pruned against it are reopened). With ``feasibility=True`` the
    search stops at the first accepted solution and ignores the objective.
    """
    deadline = None if time_limit is None else time.monotonic() + time_limit
    binaries = model.binaries
    sign = -1.0 if model.lp.maximize else 1.0
    cuts: list[Row] = []
    stack = [_Node(model.root_tableau(), 0, -math.inf)]
    pruned: list[_Node] = []
    best_x = None
    best_val = math.inf
    nodes = 0
    seen = 0

    def tol():
        return 1e-9 * (1.0 + abs(best_val))

    def open_bound():
        if feasibility:
            return None
        b = min([n.parent_obj for n in stack + pruned] + [best_val])
        return None if math.isinf(b) else sign * b + model.lp.offset

    while stack:
        if nodes >= node_limit:
            raise NodeLimitError(f"node limit {node_limit} exceeded", open_bound(), best_x, nodes)
        if deadline is not None and time.monotonic() > deadline:
            raise TimeLimitError("time limit exceeded", open_bound(), best_x, nodes)
        node = stack.pop()
        if not feasibility and node.parent_obj >= best_val - tol():
            pruned.append(node)
            continue
        tab = node.tab
        tab.add_rows(cuts[node.n_cuts:])
        node.n_cuts = len(cuts)
        nodes += 1
        status = tab.solve(feasibility_only=feasibility)
        if status is LpStatus.INFEASIBLE:
            continue
        if status is LpStatus.UNBOUNDED:
            return MilpResult(MilpStatus.UNBOUNDED, nodes=nodes, cuts=cuts, incumbents_seen=seen)
        obj = 0.0 if feasibility else tab.internal_objective()
        if not feasibility and obj >= best_val - tol():
            node.parent_obj = obj
            pruned.append(node)
            continue
        j = _branch_var(tab.x, binaries)
        if j >= 0:
            stack.extend(_children(tab, j, node.n_cuts, obj))
            continue
        x = tab.values.copy()
        seen += 1
        if callback is not None:
            new = list(callback(x) or ())
            if new:
                cuts.extend(new)
                if best_x is not None and not all(c.satisfied(best_x) for c in new):
                    best_x, best_val = None, math.inf
                    stack.extend(pruned)
                    pruned = []
                if not all(c.satisfied(x) for c in new):
                    stack.append(node)
                    continue
        best_x, best_val = x, obj
        if feasibility:
            break
    if best_x is None:
        return MilpResult(MilpStatus.INFEASIBLE, nodes=nodes, cuts=cuts, incumbents_seen=seen)
    return MilpResult(MilpStatus.OPTIMAL, best_x, model.lp.objective_value(best_x), nodes,
                      cuts, seen)


def enumerate_solutions(model: MilpModel, projection: Sequence[int] | None = None,
                        limit: int | None = None, *, node_limit: int = DEFAULT_NODE_LIMIT,
                        time_limit: float | None = None,
                        on_solution: Callable[[tuple], None] | None = None) -> EnumerationResult:
    """Collect every distinct projection of a feasible solution onto ``projection``.

    Objective values are ignored except through ``model.eps_obj``, which
    keeps only solutions whose objective reaches the threshold. The search
    stops once ``limit`` projections are found (``truncated`` is then set).
    On a node or time limit the partial set is returned with ``truncated``.
    """
    if limit is not None and limit < 1:
        raise ValueError("limit must be at least 1")
    projection = tuple(model.binaries if projection is None else projection)
    proj_set = set(projection)
    if not proj_set <= set(model.binaries):
        raise ValueError("projection must be a subset of the binary variables")
    others = tuple(j for j in model.binaries if j not in proj_set)
    deadline = None if time_limit is None else time.monotonic() + time_limit
    found: set = set()
    stack = [model.root_tableau()]
    nodes = 0
    while stack:
        if nodes >= node_limit or (deadline is not None and time.monotonic() > deadline):
            return EnumerationResult(found, True, nodes)
        tab = stack.pop()
        nodes += 1
        if tab.solve(feasibility_only=True) is not LpStatus.OPTIMAL:
            continue
        x = tab.x
        free_proj = [j for j in projection if tab.lo[j] != tab.hi[j]]
        if not free_proj:
            key = tuple(int(round(x[j])) for j in projection)
            if key in found:
                continue
        j = _branch_var(x, projection)
        if j < 0:
            j = _branch_var(x, others)
            if j < 0:
                key = tuple(int(round(x[v])) for v in projection)
                if key not in found:
                    found.add(key)
                    if on_solution is not None:
                        on_solution(key)
                    if limit is not None and len(found) >= limit:
                        return EnumerationResult(found, bool(stack) or bool(free_proj), nodes)
                if not free_proj:
                    continue
                j = free_proj[0]
        stack.extend(n.tab for n in _children(tab, j, 0, 0.0))
    return EnumerationResult(found, False, nodes)
