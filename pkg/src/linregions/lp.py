"""Dense bounded-variable simplex.

Every constraint row gets a slack column so the initial basis is the
identity; rows that start out violated are repaired by a composite
phase 1 that minimises the sum of bound infeasibilities of the basic
variables. The same phase 1 restores feasibility after a warm-started
tableau has had a bound changed or a row appended, which is what the
branch-and-bound engine relies on.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

TOL_FEAS = 1e-7
TOL_INT = 1e-7
TOL_OPT = 1e-7
TOL_PIVOT = 1e-9
TOL_COST = 1e-9

_DEGENERATE_STREAK = 50
_REFACTOR_EVERY = 100

INF = math.inf


class LpStatus(str, enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


class NumericalError(RuntimeError):
    """Pivoting stalled or the basis became numerically singular."""


SENSES = ("<=", ">=", "=")


@dataclass(frozen=True)
class Row:
    """A sparse linear constraint ``sum(values[k] * x[indices[k]]) sense rhs``."""

    indices: tuple[int, ...]
    values: tuple[float, ...]
    sense: str
    rhs: float

    def __post_init__(self):
        if self.sense not in SENSES:
            raise ValueError(f"unknown constraint sense {self.sense!r}")
        if len(self.indices) != len(self.values):
            raise ValueError("row indices and values differ in length")
        object.__setattr__(self, "indices", tuple(int(i) for i in self.indices))
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        object.__setattr__(self, "rhs", float(self.rhs))

    @classmethod
    def from_mapping(cls, coeffs: Mapping[int, float], sense: str, rhs: float) -> "Row":
        items = sorted(coeffs.items())
        return cls(tuple(i for i, _ in items), tuple(v for _, v in items), sense, rhs)

    def dense(self, n: int) -> np.ndarray:
        a = np.zeros(n)
        for i, v in zip(self.indices, self.values):
            a[i] += v
        return a

    def activity(self, x) -> float:
        return float(sum(v * x[i] for i, v in zip(self.indices, self.values)))

    def violation(self, x) -> float:
        act = self.activity(x)
        if self.sense == "<=":
            return max(0.0, act - self.rhs)
        if self.sense == ">=":
            return max(0.0, self.rhs - act)
        return abs(act - self.rhs)

    def satisfied(self, x, tol: float = TOL_FEAS) -> bool:
        return self.violation(x) <= tol * (1.0 + abs(self.rhs))


class LinearProgram:
    """Variables with (possibly infinite) bounds, constraint rows and a linear objective."""

    def __init__(self, n_vars: int = 0, maximize: bool = False):
        self.lower: list[float] = [0.0] * n_vars
        self.upper: list[float] = [INF] * n_vars
        self.cost: list[float] = [0.0] * n_vars
        self.names: list[str | None] = [None] * n_vars
        self.rows: list[Row] = []
        self.maximize = maximize
        self.offset = 0.0

    @property
    def n_vars(self) -> int:
        return len(self.lower)

    @property
    def n_rows(self) -> int:
        return len(self.rows)

    def add_variable(self, lower: float = 0.0, upper: float = INF, cost: float = 0.0,
                     name: str | None = None) -> int:
        if lower > upper:
            raise ValueError(f"variable {name or self.n_vars}: lower bound exceeds upper bound")
        self.lower.append(float(lower))
        self.upper.append(float(upper))
        self.cost.append(float(cost))
        self.names.append(name)
        return self.n_vars - 1

    def set_bounds(self, j: int, lower: float, upper: float) -> None:
        if lower > upper:
            raise ValueError("lower bound exceeds upper bound")
        self.lower[j] = float(lower)
        self.upper[j] = float(upper)

    def set_objective(self, coeffs: Mapping[int, float] | Sequence[float], maximize: bool,
                      offset: float = 0.0) -> None:
        self.cost = [0.0] * self.n_vars
        items = coeffs.items() if isinstance(coeffs, Mapping) else enumerate(coeffs)
        for j, v in items:
            self.cost[j] += float(v)
        self.maximize = maximize
        self.offset = float(offset)

    def add_row(self, coeffs, sense: str = "<=", rhs: float = 0.0) -> int:
        """Append a constraint; ``coeffs`` is a Row, a ``{index: value}`` map or a dense vector."""
        if isinstance(coeffs, Row):
            row = coeffs
        elif isinstance(coeffs, Mapping):
            row = Row.from_mapping(coeffs, sense, rhs)
        else:
            dense = list(coeffs)
            if len(dense) != self.n_vars:
                raise ValueError(f"row has {len(dense)} coefficients, expected {self.n_vars}")
            nz = [(i, v) for i, v in enumerate(dense) if v != 0]
            row = Row(tuple(i for i, _ in nz), tuple(v for _, v in nz), sense, rhs)
        if any(i < 0 or i >= self.n_vars for i in row.indices):
            raise ValueError("row references a variable out of range")
        self.rows.append(row)
        return len(self.rows) - 1

    def add_rows(self, rows: Iterable[Row]) -> "LinearProgram":
        for r in rows:
            self.add_row(r)
        return self

    def remove_rows(self, indices: Iterable[int]) -> "LinearProgram":
        drop = set(indices)
        if any(i < 0 or i >= len(self.rows) for i in drop):
            raise IndexError("row index out of range")
        self.rows = [r for k, r in enumerate(self.rows) if k not in drop]
        return self

    def copy(self) -> "LinearProgram":
        lp = LinearProgram(0, self.maximize)
        lp.lower, lp.upper = list(self.lower), list(self.upper)
        lp.cost, lp.names = list(self.cost), list(self.names)
        lp.rows = list(self.rows)
        lp.offset = self.offset
        return lp

    def objective_value(self, x) -> float:
        return float(np.dot(self.cost, np.asarray(x)[: self.n_vars])) + self.offset

    def is_feasible(self, x, tol: float = TOL_FEAS) -> bool:
        x = np.asarray(x, dtype=float)
        lo, hi = np.asarray(self.lower), np.asarray(self.upper)
        if np.any(x < lo - tol) or np.any(x > hi + tol):
            return False
        return all(r.satisfied(x, tol) for r in self.rows)


@dataclass
class LpSolution:
    status: LpStatus
    x: np.ndarray | None = None
    objective: float | None = None
    iterations: int = 0

    @property
    def optimal(self) -> bool:
        return self.status is LpStatus.OPTIMAL


class Tableau:
    """Warm-startable simplex state for a :class:`LinearProgram`.

    Columns are the structural variables followed by one slack per row
    (``a.x + s = b``). Slack bounds encode the row sense.
    """

    def __init__(self, lp: LinearProgram):
        n, m = lp.n_vars, lp.n_rows
        A = np.zeros((m, n))
        b = np.empty(m)
        slo = np.empty(m)
        shi = np.empty(m)
        for k, row in enumerate(lp.rows):
            for i, v in zip(row.indices, row.values):
                A[k, i] += v
            b[k] = row.rhs
            slo[k], shi[k] = _slack_bounds(row.sense)
        self.n_struct = n
        self.A = np.hstack([A, np.eye(m)])
        self.b = b
        self.lo = np.concatenate([np.asarray(lp.lower, dtype=float), slo])
        self.hi = np.concatenate([np.asarray(lp.upper, dtype=float), shi])
        sign = -1.0 if lp.maximize else 1.0
        self.cost = np.concatenate([sign * np.asarray(lp.cost, dtype=float), np.zeros(m)])
        self.has_cost = bool(np.any(self.cost != 0))
        self.sign = sign
        self.offset = lp.offset
        self.T = self.A.copy()
        self.basis = np.arange(n, n + m)
        self.x = np.zeros(n + m)
        self.x[:n] = _resting_value(self.lo[:n], self.hi[:n])
        self.x[n:] = b - A @ self.x[:n]
        self.pivots_since_refactor = 0
        self.total_pivots = 0
        self.bland = False

    # -- structural edits -------------------------------------------------

    def copy(self) -> "Tableau":
        t = Tableau.__new__(Tableau)
        t.__dict__.update(self.__dict__)
        # A, b and cost are only ever replaced, never written in place
        t.T = self.T.copy()
        t.basis = self.basis.copy()
        t.x = self.x.copy()
        t.lo = self.lo.copy()
        t.hi = self.hi.copy()
        return t

    @property
    def n_rows(self) -> int:
        return self.T.shape[0]

    def set_bounds(self, j: int, lower: float, upper: float) -> None:
        self.lo[j] = lower
        self.hi[j] = upper
        if np.any(self.basis == j):
            return
        old = self.x[j]
        new = min(max(old, lower), upper)
        if not (new == lower or new == upper):
            new = _resting_value(np.array([lower]), np.array([upper]))[0]
        if new != old:
            self._move_nonbasic(j, new - old)

    def fix(self, j: int, value: float) -> None:
        self.set_bounds(j, value, value)

    def add_row(self, row: Row) -> None:
        self.add_rows([row])

    def add_rows(self, rows: Sequence[Row]) -> None:
        """Append rows with their slacks basic, keeping the current point."""
        k = len(rows)
        if k == 0:
            return
        m, N = self.T.shape
        a = np.zeros((k, N + k))
        rhs = np.empty(k)
        slo = np.empty(k)
        shi = np.empty(k)
        for r, row in enumerate(rows):
            for i, v in zip(row.indices, row.values):
                a[r, i] += v
            rhs[r] = row.rhs
            slo[r], shi[r] = _slack_bounds(row.sense)
        # express the new rows in terms of the current nonbasic columns
        t_rows = a[:, :N] - a[:, self.basis] @ self.T
        s_val = rhs - a[:, :N] @ self.x
        a[:, N:] = np.eye(k)
        t_rows = np.hstack([t_rows, np.eye(k)])
        T = np.zeros((m + k, N + k))
        T[:m, :N] = self.T
        T[m:] = t_rows
        A = np.zeros((m + k, N + k))
        A[:m, :N] = self.A
        A[m:] = a
        self.T = T
        self.A = A
        self.b = np.concatenate([self.b, rhs])
        self.lo = np.concatenate([self.lo, slo])
        self.hi = np.concatenate([self.hi, shi])
        self.cost = np.concatenate([self.cost, np.zeros(k)])
        self.basis = np.concatenate([self.basis, np.arange(N, N + k)])
        self.x = np.concatenate([self.x, s_val])

    # -- solving ----------------------------------------------------------

    def solve(self, max_iter: int | None = None, feasibility_only: bool = False) -> LpStatus:
        m, N = self.T.shape
        if max_iter is None:
            max_iter = 50 * (m + N) + 100
        use_cost = self.has_cost and not feasibility_only
        it = 0
        repairs = 0
        while True:
            if it > max_iter:
                raise NumericalError(f"simplex exceeded {max_iter} iterations")
            basis = self.basis
            xb = self.x[basis]
            lob, hib = self.lo[basis], self.hi[basis]
            below = xb < lob - TOL_FEAS
            above = xb > hib + TOL_FEAS
            phase1 = bool(below.any() or above.any())
            if phase1:
                cb = above.astype(float) - below.astype(float)
                d = -(cb @ self.T)
            elif use_cost:
                d = self.cost - self.cost[basis] @ self.T
            else:
                d = None
            q = -1
            if d is not None:
                d[basis] = 0.0
                xs = self.x
                can_up = (d < -TOL_COST) & (xs < self.hi)
                can_down = (d > TOL_COST) & (xs > self.lo)
                elig = can_up | can_down
                if elig.any():
                    if self.bland:
                        q = int(np.flatnonzero(elig)[0])
                    else:
                        q = int(np.argmax(np.where(elig, np.abs(d), -1.0)))
            if q < 0:
                if phase1:
                    if self._verify(repairs):
                        repairs += 1
                        continue
                    return LpStatus.INFEASIBLE
                if self._verify(repairs):
                    repairs += 1
                    continue
                return LpStatus.OPTIMAL
            it += 1
            sigma = 1.0 if d[q] < 0 else -1.0
            alpha = sigma * self.T[:, q]
            # ratio test: basic i moves by -alpha_i * t
            dec = alpha > TOL_PIVOT
            inc = alpha < -TOL_PIVOT
            target = np.full(m, np.nan)
            target[dec] = np.where(above[dec], hib[dec], np.where(below[dec], -INF, lob[dec]))
            target[inc] = np.where(below[inc], lob[inc], np.where(above[inc], INF, hib[inc]))
            moving = dec | inc
            with np.errstate(invalid="ignore", divide="ignore"):
                ratio = np.where(moving, (xb - target) / np.where(moving, alpha, 1.0), INF)
            ratio = np.where(np.isnan(ratio), INF, ratio)
            ratio = np.maximum(ratio, 0.0)
            t_flip = self.hi[q] - self.lo[q]
            p = -1
            t = INF
            if moving.any():
                tmin = ratio.min()
                if tmin < INF:
                    cand = np.flatnonzero(ratio <= tmin + 1e-12)
                    if self.bland:
                        p = int(cand[np.argmin(basis[cand])])
                    else:
                        p = int(cand[np.argmax(np.abs(alpha[cand]))])
                    t = float(ratio[p])
            if t_flip <= t:
                if t_flip == INF:
                    if phase1:
                        raise NumericalError("unbounded ray during phase 1")
                    return LpStatus.UNBOUNDED
                self._move_nonbasic(q, sigma * t_flip, snap=True)
                self._note_step(t_flip)
                continue
            self.x[basis] = xb - alpha * t
            self.x[q] += sigma * t
            leaving = basis[p]
            self.x[leaving] = target[p]
            self._pivot(p, q)
            self._note_step(t)

    def _note_step(self, t: float) -> None:
        if t <= 1e-12:
            self._degenerate = getattr(self, "_degenerate", 0) + 1
            if self._degenerate > _DEGENERATE_STREAK:
                self.bland = True
        else:
            self._degenerate = 0

    def _move_nonbasic(self, j: int, delta: float, snap: bool = False) -> None:
        self.x[self.basis] -= self.T[:, j] * delta
        if snap:
            # land exactly on the opposite bound
            self.x[j] = self.hi[j] if delta > 0 else self.lo[j]
        else:
            self.x[j] += delta

    def _pivot(self, p: int, q: int) -> None:
        T = self.T
        piv = T[p, q]
        T[p] /= piv
        col = T[:, q].copy()
        col[p] = 0.0
        T -= np.outer(col, T[p])
        T[:, q] = 0.0
        T[p, q] = 1.0
        self.basis[p] = q
        self.total_pivots += 1
        self.pivots_since_refactor += 1
        if self.pivots_since_refactor >= _REFACTOR_EVERY:
            self.refactor()

    def refactor(self) -> None:
        """Recompute the tableau and basic values from the original rows."""
        B = self.A[:, self.basis]
        try:
            self.T = np.linalg.solve(B, self.A)
        except np.linalg.LinAlgError:
            raise NumericalError("basis matrix is singular") from None
        xn = self.x.copy()
        xn[self.basis] = 0.0
        self.x[self.basis] = np.linalg.solve(B, self.b - self.A @ xn)
        self.pivots_since_refactor = 0

    def _verify(self, repairs: int) -> bool:
        """Return True if the solution drifted and was refactored (caller re-iterates)."""
        if repairs >= 3 or self.T.shape[0] == 0:
            return False
        resid = np.abs(self.A @ self.x - self.b)
        scale = 1.0 + np.abs(self.b)
        if np.all(resid <= 1e-9 * scale):
            return False
        self.refactor()
        return True

    # -- results ----------------------------------------------------------

    @property
    def values(self) -> np.ndarray:
        return self.x[: self.n_struct]

    def objective(self) -> float:
        """Objective in the caller's sense (including the constant offset)."""
        return self.sign * float(self.cost[: self.n_struct] @ self.x[: self.n_struct]) + self.offset

    def internal_objective(self) -> float:
        return float(self.cost @ self.x)


def _slack_bounds(sense: str) -> tuple[float, float]:
    if sense == "<=":
        return 0.0, INF
    if sense == ">=":
        return -INF, 0.0
    if sense == "=":
        return 0.0, 0.0
    raise ValueError(f"unknown constraint sense {sense!r}")


def _resting_value(lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    return np.where(np.isfinite(lo), lo, np.where(np.isfinite(hi), hi, 0.0))


def solve_lp(lp: LinearProgram, max_iter: int | None = None) -> LpSolution:
    """Solve ``lp`` from a cold start."""
    for lo, hi in zip(lp.lower, lp.upper):
        if lo > hi:
            return LpSolution(LpStatus.INFEASIBLE)
    tab = Tableau(lp)
    status = tab.solve(max_iter=max_iter)
    if status is LpStatus.OPTIMAL:
        x = tab.values.copy()
        return LpSolution(status, x, lp.objective_value(x), tab.total_pivots)
    return LpSolution(status, iterations=tab.total_pivots)
