"""Dense two-phase tableau simplex with Bland's rule.

Solves ``min c.x  s.t.  A x <= b`` where each variable is either free or
nonnegative. Meant for small problems; the pivoting loop is pure Python over
a dense numpy tableau.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class LPError(RuntimeError):
    pass


class Infeasible(LPError):
    pass


class Unbounded(LPError):
    pass


@dataclass
class SimplexResult:
    x: np.ndarray
    objective: float
    duals: np.ndarray
    dual_objective: float
    pivots: int

    @property
    def duality_gap(self) -> float:
        return abs(self.objective - self.dual_objective)


def _pivot(T: np.ndarray, row: int, col: int) -> None:
    T[row] /= T[row, col]
    factor = T[:, col].copy()
    factor[row] = 0.0
    T -= np.outer(factor, T[row])


def _run(T: np.ndarray, basis: list[int], n_cols: int, tol: float, max_pivots: int) -> int:
    """Minimise the objective stored in the last row of ``T`` (as reduced costs).

    Only the first ``n_cols`` columns may enter the basis.
    """
    m = len(basis)
    pivots = 0
    while True:
        cost = T[-1, :n_cols]
        candidates = np.flatnonzero(cost < -tol)
        if candidates.size == 0:
            return pivots
        col = int(candidates[0])
        column = T[:m, col]
        rows = np.flatnonzero(column > tol)
        if rows.size == 0:
            raise Unbounded("objective is unbounded below")
        ratios = T[rows, -1] / column[rows]
        best = ratios.min()
        tied = rows[ratios <= best + tol * max(1.0, abs(best))]
        row = int(min(tied, key=lambda r: basis[r]))
        _pivot(T, row, col)
        basis[row] = col
        pivots += 1
        if pivots > max_pivots:
            raise LPError(f"no convergence after {max_pivots} pivots")


def solve(c, A, b, free=None, tol: float = 1e-10, max_pivots: int = 100_000) -> SimplexResult:
    """Minimise ``c.x`` subject to ``A x <= b``.

    ``free`` is a boolean mask of unrestricted variables; the rest are
    constrained to be nonnegative.
    """
    c = np.asarray(c, dtype=np.float64)
    A = np.asarray(A, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    m, n = A.shape
    free = np.zeros(n, bool) if free is None else np.asarray(free, bool)

    # x = x_plus - x_minus for free variables
    split = np.flatnonzero(free)
    A_std = np.hstack([A, -A[:, split]])
    c_std = np.concatenate([c, -c[split]])
    nx = A_std.shape[1]

    sign = np.where(b < 0, -1.0, 1.0)
    art_rows = np.flatnonzero(sign < 0)
    n_art = art_rows.size
    width = nx + m + n_art
    T = np.zeros((m + 1, width + 1))
    T[:m, :nx] = sign[:, None] * A_std
    T[:m, nx:nx + m] = np.diag(sign)
    T[:m, -1] = sign * b
    basis = [nx + i for i in range(m)]
    for j, r in enumerate(art_rows):
        T[r, nx + m + j] = 1.0
        basis[r] = nx + m + j

    pivots = 0
    if n_art:
        # phase 1: minimise the sum of artificials
        T[-1, nx + m:width] = 1.0
        for r in art_rows:
            T[-1] -= T[r]
        pivots += _run(T, basis, width, tol, max_pivots)
        if T[-1, -1] < -tol * max(1.0, np.abs(b).max()):
            raise Infeasible("no feasible point")
        for r in range(m):
            if basis[r] >= nx + m:
                nz = np.flatnonzero(np.abs(T[r, :nx + m]) > tol)
                if nz.size:
                    _pivot(T, r, int(nz[0]))
                    basis[r] = int(nz[0])
                    pivots += 1
        T[:, nx + m:width] = 0.0

    T[-1] = 0.0
    T[-1, :nx] = c_std
    for r, j in enumerate(basis):
        if j < nx and c_std[j] != 0:
            T[-1] -= c_std[j] * T[r]
    pivots += _run(T, basis, nx + m, tol, max_pivots)

    z = np.zeros(width)
    for r, j in enumerate(basis):
        z[j] = T[r, -1]
    x = z[:n].copy()
    x[split] -= z[n:nx]
    duals = -T[-1, nx:nx + m].copy()
    return SimplexResult(
        x=x,
        objective=float(c @ x),
        duals=duals,
        dual_objective=float(b @ duals),
        pivots=pivots,
    )
