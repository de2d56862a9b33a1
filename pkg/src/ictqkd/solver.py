"""Linear-program solvers: a bundled dense two-phase simplex and a HiGHS adapter."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Protocol

import numpy as np
from scipy.linalg import lu_factor, lu_solve

if TYPE_CHECKING:
    from .decoy_lp import LinearProgram

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"

FEAS_TOL = 1e-10
# smallest admissible pivot element; tiny pivots blow up the tableau
PIVOT_TOL = 1e-9
# reduced-cost threshold, relative to the largest cost coefficient
COST_TOL = 1e-12
# Switch from Dantzig's rule to Bland's rule after this many degenerate pivots in a row.
DEGENERATE_LIMIT = 50


class NonConvergenceError(RuntimeError):
    """The simplex iteration cap was reached before optimality was proven."""


@dataclass(frozen=True)
class LPSolution:
    status: str
    objective: float
    values: np.ndarray

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL


class LPSolver(Protocol):
    def solve(self, lp: "LinearProgram") -> LPSolution: ...


@dataclass
class _Block:
    """Standard-form data ``min c.x  s.t.  A x {<=,>=,=} b,  x >= 0``."""

    A: np.ndarray
    kinds: np.ndarray  # -1 for <=, +1 for >=, 0 for =
    b: np.ndarray
    c: np.ndarray


class _Tableau:
    """Revised simplex on one standard-form block.

    The basis matrix is refactored from the original data at every
    iteration, so round-off does not accumulate across pivots.  The ratio
    test is Harris's two-pass rule: among rows whose ratio lies within the
    feasibility tolerance of the minimum, the largest pivot element wins.
    """

    def __init__(self, block: _Block, max_iter: int, bland: bool = False):
        A, b, kinds = block.A.copy(), block.b.copy(), block.kinds.copy()
        m, n = A.shape
        neg = b < 0
        A[neg] *= -1
        b[neg] *= -1
        kinds[neg] *= -1
        n_slack = int(np.sum(kinds != 0))
        n_art = int(np.sum(kinds >= 0))
        self.n_struct = n
        self.n_total = n + n_slack + n_art
        self.art_start = n + n_slack
        full = np.zeros((m, self.n_total))
        full[:, :n] = A
        basis = np.empty(m, dtype=int)
        s = n
        a = self.art_start
        for i in range(m):
            if kinds[i] < 0:
                full[i, s] = 1.0
                basis[i] = s
                s += 1
            else:
                if kinds[i] > 0:
                    full[i, s] = -1.0
                    s += 1
                full[i, a] = 1.0
                basis[i] = a
                a += 1
        self.A0 = full
        self.b0 = b
        self.basis = basis
        self.max_iter = max_iter
        self.iterations = 0
        self.force_bland = bland

    def _factor(self):
        return lu_factor(self.A0[:, self.basis], check_finite=False)

    def _run(self, cost: np.ndarray, allowed: np.ndarray) -> str:
        """Minimize ``cost`` from the current basis; ``allowed`` masks entering columns."""
        degenerate = 0
        bland = self.force_bland
        scale = max(1.0, float(np.max(np.abs(cost))))
        while True:
            if self.iterations >= self.max_iter:
                raise NonConvergenceError(
                    f"simplex did not converge within {self.max_iter} iterations"
                )
            lu = self._factor()
            xb = np.maximum(lu_solve(lu, self.b0, check_finite=False), 0.0)
            y = lu_solve(lu, cost[self.basis], trans=1, check_finite=False)
            reduced = cost - self.A0.T @ y
            reduced[~allowed] = 0.0
            reduced[self.basis] = 0.0
            candidates = np.flatnonzero(reduced < -COST_TOL * scale)
            if candidates.size == 0:
                return OPTIMAL
            if bland:
                col = int(candidates[0])
            else:
                col = int(candidates[np.argmin(reduced[candidates])])
            d = lu_solve(lu, self.A0[:, col], check_finite=False)
            rows = np.flatnonzero(d > PIVOT_TOL)
            if rows.size == 0:
                return UNBOUNDED
            ratios = xb[rows] / d[rows]
            if bland:
                best = np.min(ratios)
                ties = rows[ratios <= best * (1 + 1e-12) + 1e-300]
                row = int(ties[np.argmin(self.basis[ties])])
            else:
                limit = np.min((xb[rows] + FEAS_TOL) / d[rows])
                ties = rows[ratios <= limit]
                row = int(ties[np.argmax(d[ties])])
            if xb[row] <= FEAS_TOL:
                degenerate += 1
                if degenerate > DEGENERATE_LIMIT:
                    bland = True
            else:
                degenerate = 0
            self.basis[row] = col
            self.iterations += 1

    def _basic_values(self) -> np.ndarray:
        return lu_solve(self._factor(), self.b0, check_finite=False)

    def _drive_out_artificials(self) -> None:
        for row in range(len(self.basis)):
            if self.basis[row] < self.art_start:
                continue
            lu = self._factor()
            e = np.zeros(len(self.basis))
            e[row] = 1.0
            z = lu_solve(lu, e, trans=1, check_finite=False)
            entries = np.abs(z @ self.A0[:, : self.art_start])
            entries[self.basis[self.basis < self.art_start]] = 0.0
            col = int(np.argmax(entries))
            if entries[col] > 1e-9:
                self.basis[row] = col
            # otherwise the row is redundant and its artificial stays at zero

    def _solution(self) -> np.ndarray:
        x = np.zeros(self.n_total)
        x[self.basis] = np.maximum(self._basic_values(), 0.0)
        return x

    def solve(self, c: np.ndarray) -> tuple[str, np.ndarray]:
        allowed = np.ones(self.n_total, dtype=bool)
        if self.art_start < self.n_total:
            phase1 = np.zeros(self.n_total)
            phase1[self.art_start :] = 1.0
            self._run(phase1, allowed)
            xb = self._basic_values()
            infeas = float(np.sum(xb[self.basis >= self.art_start]))
            if infeas > FEAS_TOL * max(1.0, float(np.max(self.b0, initial=0.0))):
                return INFEASIBLE, np.zeros(self.n_struct)
            self._drive_out_artificials()
        allowed[self.art_start :] = False
        cost = np.zeros(self.n_total)
        cost[: self.n_struct] = c
        status = self._run(cost, allowed)
        if status != OPTIMAL:
            return status, np.zeros(self.n_struct)
        return OPTIMAL, self._solution()[: self.n_struct]


def _max_violation(block: _Block, x: np.ndarray) -> float:
    if block.A.shape[0] == 0:
        return 0.0
    lhs = block.A @ x
    gap = np.where(block.kinds < 0, lhs - block.b, np.where(block.kinds > 0, block.b - lhs, np.abs(lhs - block.b)))
    scale = 1.0 + np.abs(block.b)
    return float(max(np.max(gap / scale), np.max(-x, initial=0.0)))


def _solve_block(block: _Block, cap: int) -> tuple[str, np.ndarray]:
    """Solve one block; re-solve with Bland's rule if the answer fails verification."""
    for bland in (False, True):
        status, x = _Tableau(block, cap, bland=bland).solve(block.c)
        if status != OPTIMAL or _max_violation(block, x) <= 1e-9:
            return status, x
    raise NonConvergenceError(
        f"simplex solution violates constraints by {_max_violation(block, x):.3e} after retry"
    )


def _components(n_vars: int, rows: list[np.ndarray]) -> list[np.ndarray]:
    """Connected components of variables linked by shared constraint rows."""
    parent = list(range(n_vars))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for cols in rows:
        if cols.size > 1:
            root = find(int(cols[0]))
            for j in cols[1:]:
                r = find(int(j))
                if r != root:
                    parent[r] = root
    groups: dict[int, list[int]] = {}
    for i in range(n_vars):
        groups.setdefault(find(i), []).append(i)
    return [np.array(g) for g in groups.values()]


class SimplexSolver:
    """Dense two-phase simplex (Dantzig pricing with a Bland fallback).

    Variables are shifted to their lower bounds and finite upper bounds become
    rows.  The LP is split into independent blocks of variables that share no
    constraint, and each block is solved separately.
    """

    def __init__(self, max_iter: int | None = None, decompose: bool = True):
        self.max_iter = max_iter
        self.decompose = decompose

    def solve(self, lp: "LinearProgram") -> LPSolution:
        A, kinds, b = lp.matrix()
        n = lp.n_vars
        lower, upper = lp.lower, lp.upper
        if np.any(~np.isfinite(lower)):
            raise ValueError("the bundled simplex needs finite lower bounds")
        sign = 1.0 if lp.sense == "min" else -1.0
        c = sign * lp.objective
        b = b - A @ lower
        row_cols = [np.flatnonzero(A[i]) for i in range(A.shape[0])]
        for i, rc in enumerate(row_cols):
            # empty rows read 0 {rel} b
            if rc.size == 0 and (
                (kinds[i] <= 0 and b[i] < -FEAS_TOL)
                or (kinds[i] >= 0 and b[i] > FEAS_TOL)
            ):
                return LPSolution(INFEASIBLE, math.nan, np.full(n, math.nan))
        if np.any(upper < lower):
            return LPSolution(INFEASIBLE, math.nan, np.full(n, math.nan))
        groups = _components(n, row_cols) if self.decompose else [np.arange(n)]
        x = lower.astype(float).copy()
        # identical blocks recur when boxes and overlaps repeat across histories
        solved: dict[bytes, tuple[str, np.ndarray]] = {}
        group_of = np.empty(n, dtype=int)
        for g, cols in enumerate(groups):
            group_of[cols] = g
        rows_by_group: list[list[int]] = [[] for _ in groups]
        for i, rc in enumerate(row_cols):
            if rc.size:
                rows_by_group[group_of[rc[0]]].append(i)
        for cols, row_ids in zip(groups, rows_by_group):
            sub_A = A[np.ix_(row_ids, cols)] if row_ids else np.zeros((0, len(cols)))
            sub_b = b[row_ids]
            sub_k = kinds[row_ids]
            span = upper[cols] - lower[cols]
            finite = np.isfinite(span)
            box_A = np.eye(len(cols))[finite]
            block = _Block(
                A=np.vstack([sub_A, box_A]),
                kinds=np.concatenate([sub_k, -np.ones(int(finite.sum()), dtype=int)]),
                b=np.concatenate([sub_b, span[finite]]),
                c=c[cols],
            )
            key = b"".join(arr.tobytes() for arr in (block.A, block.kinds, block.b, block.c))
            if key not in solved:
                m_rows, n_cols = block.A.shape
                cap = self.max_iter or 50 * (m_rows + n_cols) + 1000
                solved[key] = _solve_block(block, cap)
            status, sub_x = solved[key]
            if status != OPTIMAL:
                return LPSolution(status, math.nan, np.full(n, math.nan))
            x[cols] += sub_x
        return LPSolution(OPTIMAL, float(lp.objective @ x + lp.constant), x)


class HighsSolver:
    """Adapter for the HiGHS solver shipped with SciPy."""

    def solve(self, lp: "LinearProgram") -> LPSolution:
        from scipy.optimize import linprog

        A, kinds, b = lp.matrix()
        sign = 1.0 if lp.sense == "min" else -1.0
        ub_rows = kinds != 0
        A_ub = np.where((kinds > 0)[:, None], -A, A)[ub_rows]
        b_ub = np.where(kinds > 0, -b, b)[ub_rows]
        eq = kinds == 0
        res = linprog(
            sign * lp.objective,
            A_ub=A_ub if A_ub.size else None,
            b_ub=b_ub if A_ub.size else None,
            A_eq=A[eq] if eq.any() else None,
            b_eq=b[eq] if eq.any() else None,
            bounds=list(zip(lp.lower, np.where(np.isfinite(lp.upper), lp.upper, None))),
            method="highs",
            options={"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10},
        )
        if res.status == 2:
            return LPSolution(INFEASIBLE, math.nan, np.full(lp.n_vars, math.nan))
        if res.status == 3:
            return LPSolution(UNBOUNDED, math.nan, np.full(lp.n_vars, math.nan))
        if res.status != 0:
            raise NonConvergenceError(f"HiGHS failed: {res.message}")
        x = np.asarray(res.x)
        return LPSolution(OPTIMAL, float(lp.objective @ x + lp.constant), x)


def get_solver(name: str) -> LPSolver:
    if name == "simplex":
        return SimplexSolver()
    if name == "highs":
        return HighsSolver()
    raise ValueError(f"unknown solver {name!r}; choose 'simplex' or 'highs'")


def solve_lp(lp: "LinearProgram", solver: LPSolver | None = None) -> LPSolution:
    """Solve ``lp`` with ``solver`` (the bundled simplex by default)."""
    return (solver or SimplexSolver()).solve(lp)
