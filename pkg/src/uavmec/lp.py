"""Small dense two-phase simplex solver with Bland's anti-cycling rule.

Solves  min c.x  subject to  A x <= b,  x >= 0.  Designed for the tiny
per-(vehicle, slot) recovery programs (a handful of variables and rows), so
everything is dense and exact pivoting order beats sparse cleverness.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_TOL = 1e-11


@dataclass
class LpResult:
    x: np.ndarray
    status: str  # "optimal" | "infeasible" | "unbounded" | "iteration_limit"
    objective: float

    @property
    def ok(self) -> bool:
        return self.status == "optimal"


def _pivot(tab: np.ndarray, basis: np.ndarray, row: int, col: int) -> None:
    tab[row] /= tab[row, col]
    for r in range(tab.shape[0]):
        if r != row and abs(tab[r, col]) > 0.0:
            tab[r] -= tab[r, col] * tab[row]
    basis[row] = col


def _iterate(tab: np.ndarray, basis: np.ndarray, n_cols: int, maxiter: int) -> str:
    """Run Bland-rule simplex on the tableau; the objective is the last row."""
    m = tab.shape[0] - 1
    for _ in range(maxiter):
        obj = tab[-1, :n_cols]
        entering = -1
        for j in range(n_cols):
            if obj[j] < -_TOL:
                entering = j
                break
        if entering < 0:
            return "optimal"
        # Minimum-ratio test, ties broken by smallest basic variable index.
        best_ratio, leave = np.inf, -1
        for i in range(m):
            a = tab[i, entering]
            if a > _TOL:
                ratio = tab[i, -1] / a
                if ratio < best_ratio - _TOL or (
                    abs(ratio - best_ratio) <= _TOL and (leave < 0 or basis[i] < basis[leave])
                ):
                    best_ratio, leave = ratio, i
        if leave < 0:
            return "unbounded"
        _pivot(tab, basis, leave, entering)
    return "iteration_limit"


def solve_lp(c, a_ub, b_ub, maxiter: int = 2000) -> LpResult:
    """Two-phase simplex for  min c.x  s.t.  a_ub x <= b_ub,  x >= 0."""
    c = np.asarray(c, dtype=float)
    a = np.atleast_2d(np.asarray(a_ub, dtype=float)).copy()
    b = np.asarray(b_ub, dtype=float).copy()
    m, n = a.shape
    if c.size != n or b.size != m:
        raise ValueError("inconsistent LP dimensions")

    flip = b < 0
    a[flip] *= -1.0
    b[flip] *= -1.0
    # slack sign: +1 for original rows, -1 (surplus) for flipped ones
    slack = np.where(flip, -1.0, 1.0)
    art_rows = np.nonzero(flip)[0]
    n_art = art_rows.size

    n_cols = n + m + n_art
    tab = np.zeros((m + 1, n_cols + 1))
    tab[:m, :n] = a
    tab[:m, -1] = b
    basis = np.empty(m, dtype=int)
    for i in range(m):
        tab[i, n + i] = slack[i]
        basis[i] = n + i
    for j, i in enumerate(art_rows):
        tab[i, n + m + j] = 1.0
        basis[i] = n + m + j

    if n_art:
        # Phase 1: minimize the artificial sum, expressed over the basis.
        tab[-1, :] = 0.0
        tab[-1, n + m : n + m + n_art] = 1.0
        for i in art_rows:
            tab[-1] -= tab[i]
        status = _iterate(tab, basis, n_cols, maxiter)
        if status != "optimal":
            return LpResult(np.zeros(n), "infeasible" if status == "unbounded" else status, np.nan)
        if -tab[-1, -1] > 1e-7 * max(1.0, abs(b).max()):
            return LpResult(np.zeros(n), "infeasible", np.nan)
        # Drive any residual artificial out of the basis.
        for i in range(m):
            if basis[i] >= n + m:
                for j in range(n + m):
                    if abs(tab[i, j]) > _TOL:
                        _pivot(tab, basis, i, j)
                        break

    # Phase 2 objective row.
    tab[-1, :] = 0.0
    tab[-1, :n] = c
    tab[-1, n + m :] = 0.0
    for i in range(m):
        if basis[i] < n and abs(tab[-1, basis[i]]) > 0.0:
            tab[-1] -= tab[-1, basis[i]] * tab[i]
    # Freeze artificial columns so they never re-enter.
    active_cols = n + m
    status = _iterate(tab, basis, active_cols, maxiter)

    x = np.zeros(n)
    for i in range(m):
        if basis[i] < n:
            x[basis[i]] = tab[i, -1]
    return LpResult(x, status, float(c @ x) if status == "optimal" else np.nan)
