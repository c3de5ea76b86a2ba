"""Probabilistic lower bounds on MILP solution counts via random parity constraints.

Each outer iteration runs a single branch-and-bound search whose
incumbent callback keeps drawing random XOR constraints until one cuts
off the incumbent. The number of constraints ``r`` needed to make the
model infeasible feeds the feasibility counters ``f[j]``, which are
turned into MBound-style lower-bound probabilities.
"""

from __future__ import annotations

import itertools
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .lp import LinearProgram, Row
from .milp import DEFAULT_NODE_LIMIT, MilpModel, MilpStatus, SearchLimitError, solve_milp
from .model import maps

DEFAULT_CONFIDENCE = 0.95


@dataclass(frozen=True)
class ParityConstraint:
    variables: tuple[int, ...]
    odd: bool

    def __post_init__(self):
        if len(set(self.variables)) != len(self.variables):
            raise ValueError("parity variables must be distinct")
        if len(self.variables) < 2:
            raise ValueError("parity constraint needs at least two variables")

    @property
    def k(self) -> int:
        return len(self.variables)

    def holds(self, x) -> bool:
        total = sum(int(round(x[v])) for v in self.variables)
        return (total % 2 == 1) == self.odd

    def removes(self, x) -> bool:
        return not self.holds(x)


def sample_parity(k: int, candidate_vars: Sequence[int], rng: np.random.Generator) -> ParityConstraint:
    """Uniform ``k``-subset of the candidates with a uniform parity bit."""
    candidate_vars = list(candidate_vars)
    if k > len(candidate_vars):
        raise ValueError(f"k={k} exceeds the {len(candidate_vars)} candidate variables")
    if k < 2:
        raise ValueError("k must be at least 2")
    idx = rng.choice(len(candidate_vars), size=k, replace=False)
    chosen = tuple(sorted(candidate_vars[i] for i in idx))
    return ParityConstraint(chosen, bool(rng.integers(2)))


def parity_cuts(c: ParityConstraint) -> list[Row]:
    """Canonical hypercube cuts whose 0-1 solutions are exactly the assignments of the right parity.

    Each cut removes one wrong-parity vertex ``U'``:
    ``sum_{U'} w - sum_{U \\ U'} w <= |U'| - 1``. For ``k == 2`` with odd
    parity the single equality ``w_i + w_j = 1`` is used instead.
    """
    U = c.variables
    if c.k == 2 and c.odd:
        return [Row(U, (1.0, 1.0), "=", 1.0)]
    bad_size_parity = 0 if c.odd else 1
    rows = []
    for size in range(bad_size_parity, c.k + 1, 2):
        for sub in itertools.combinations(range(c.k), size):
            members = set(sub)
            vals = tuple(1.0 if p in members else -1.0 for p in range(c.k))
            rows.append(Row(U, vals, "<=", size - 1))
    return rows


def lb_probability(f_j: int, i: int, alpha: int = 1) -> float | None:
    """Probability that ``2**(r - alpha)`` is a strict lower bound, given ``f_j`` of ``i`` runs
    stayed feasible after ``r`` constraints. None when ``f_j / i <= 1/2``."""
    if i <= 0:
        raise ValueError("i must be positive")
    if f_j < 0 or f_j > i:
        raise ValueError("f_j must lie in [0, i]")
    delta = f_j / i - 0.5
    if delta <= 0:
        return None
    beta = 2.0**alpha * (0.5 + delta) - 1.0
    base = math.exp(beta) / (1.0 + beta) ** (1.0 + beta)
    return 1.0 - base ** (i / 2.0**alpha)


def required_iterations(target_prob: float) -> int:
    """Fewest iterations for which all-feasible outcomes certify ``target_prob``."""
    if not 0 < target_prob < 1:
        raise ValueError("target probability must lie in (0, 1)")
    i = 1
    while 1.0 - (math.e / 4.0) ** (i / 2.0) < target_prob:
        i += 1
    return i


@dataclass
class ProbLowerBound:
    k: int
    iterations: int
    f: list[int]
    P: list[float]
    best_j: int | None
    confidence: float
    r_values: list[int] = field(default_factory=list)
    solver_calls: int = 0
    timed_out: bool = False
    elapsed: float = 0.0

    @property
    def bound(self) -> int | None:
        """Certified lower bound ``2**best_j``; 1 when only feasibility is known."""
        if self.best_j is not None:
            return 2**self.best_j
        return 1 if self.f and self.f[0] > 0 else None

    @property
    def eta_lb(self) -> float | None:
        b = self.bound
        return None if b is None else maps(b)

    def to_dict(self) -> dict:
        return {"k": self.k, "iterations": self.iterations, "f": list(self.f),
                "P": list(self.P), "best_j": self.best_j, "eta_lb": self.eta_lb,
                "confidence": self.confidence, "solver_calls": self.solver_calls,
                "timed_out": self.timed_out, "elapsed": self.elapsed}


def probabilities(f: Sequence[int], i: int) -> list[float]:
    """``P[j]`` from ``f[j+1]``, stopping at the first ``j`` without a bound."""
    P = []
    for j in range(len(f) - 1):
        p = lb_probability(f[j + 1], i)
        if p is None:
            break
        P.append(p)
    return P


def best_index(P: Sequence[float], confidence: float) -> int | None:
    best = None
    for j, p in enumerate(P):
        if p >= confidence:
            best = j
    return best


def candidate_variables(m: MilpModel) -> tuple[int, ...]:
    return m.free_binaries()


def _feasibility_model(m: MilpModel) -> MilpModel:
    lp: LinearProgram = m.lp.copy()
    if m.eps_obj is None:
        lp.set_objective({}, False)
        return MilpModel(lp, m.binaries)
    return MilpModel(lp, m.binaries, m.eps_obj)


def run_iteration(m: MilpModel, k: int, candidates: Sequence[int], seed, index: int, *,
                  node_limit: int = DEFAULT_NODE_LIMIT, time_limit: float | None = None) -> int:
    """One outer iteration: number of parity constraints added until infeasible."""
    rng = np.random.default_rng([int(seed), int(index)])
    r = 0

    def callback(x):
        nonlocal r
        rows = []
        while True:
            c = sample_parity(k, candidates, rng)
            rows.extend(parity_cuts(c))
            r += 1
            if c.removes(x):
                return rows

    res = solve_milp(m, callback, node_limit=node_limit, time_limit=time_limit,
                     feasibility=True)
    if res.status is not MilpStatus.INFEASIBLE:
        raise RuntimeError("parity search ended with a surviving solution")
    return r


def _iteration_job(args):
    m, k, candidates, seed, index, node_limit = args
    return run_iteration(m, k, candidates, seed, index, node_limit=node_limit)


def run_mipbound(m: MilpModel, k: int, iterations: int | None = None,
                 confidence: float = DEFAULT_CONFIDENCE, seed: int = 0, *,
                 time_limit: float | None = None, node_limit: int = DEFAULT_NODE_LIMIT,
                 candidates: Sequence[int] | None = None, n_jobs: int = 1) -> ProbLowerBound:
    """Estimate a lower bound on the number of binary projections of ``m``'s solutions.

    ``iterations`` defaults to the fewest that can certify ``confidence``
    (see :func:`required_iterations`). Only the objective threshold ``eps_obj``
    matters; the objective itself is dropped. Each iteration draws its
    constraints from an RNG seeded by ``(seed, iteration)``, so results do
    not depend on ``n_jobs``. On ``time_limit`` the completed iterations are
    reported and ``timed_out`` is set.
    """
    if iterations is None:
        iterations = required_iterations(confidence)
    if iterations < 1:
        raise ValueError("iterations must be at least 1")
    cands = tuple(candidate_variables(m) if candidates is None else candidates)
    if k > len(cands):
        raise ValueError(f"k={k} exceeds the {len(cands)} non-fixed binaries")
    start = time.monotonic()
    deadline = None if time_limit is None else start + time_limit
    fm = _feasibility_model(m)
    rs: list[int] = []
    timed_out = False
    if n_jobs > 1 and deadline is None:
        with ProcessPoolExecutor(n_jobs) as pool:
            jobs = [(fm, k, cands, seed, t, node_limit) for t in range(iterations)]
            rs = list(pool.map(_iteration_job, jobs))
    else:
        for t in range(iterations):
            remaining = None if deadline is None else deadline - time.monotonic()
            if remaining is not None and remaining <= 0:
                timed_out = True
                break
            try:
                rs.append(run_iteration(fm, k, cands, seed, t, node_limit=node_limit,
                                        time_limit=remaining))
            except SearchLimitError:
                if deadline is not None and time.monotonic() >= deadline:
                    timed_out = True
                    break
                raise
    return summarize(rs, k, confidence, timed_out=timed_out,
                     elapsed=time.monotonic() - start, n_binaries=len(cands))


def summarize(rs: Sequence[int], k: int, confidence: float = DEFAULT_CONFIDENCE, *,
              timed_out: bool = False, elapsed: float = 0.0,
              n_binaries: int | None = None) -> ProbLowerBound:
    """Turn per-iteration constraint counts into ``f``, ``P`` and the selected bound."""
    i = len(rs)
    size = max([n_binaries or 0] + [r for r in rs]) + 1
    f = [0] * size
    for r in rs:
        for j in range(r):
            f[j] += 1
    P = probabilities(f, i) if i else []
    return ProbLowerBound(k, i, f, P, best_index(P, confidence), confidence, list(rs), i,
                          timed_out, elapsed)
