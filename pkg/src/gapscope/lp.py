"""Dense two-phase primal simplex for desk-scale linear programs.

Solves

    minimize    c . x
    subject to  A_ub x <= b_ub,  A_eq x = b_eq,  x >= 0

with Bland's anti-cycling rule. Slack variables for the inequality rows
are added internally and do not count toward the structural-variable cap.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InfeasibleError, LinearProgramError, UnboundedError

PIVOT_TOL = 1e-9
MAX_STRUCTURAL_VARS = 16


@dataclass
class LpResult:
    x: np.ndarray
    fun: float
    status: str  # "optimal"


def _pivot(tableau, basis, row, col):
    tableau[row] /= tableau[row, col]
    for r in range(tableau.shape[0]):
        if r != row and abs(tableau[r, col]) > 0.0:
            tableau[r] -= tableau[r, col] * tableau[row]
    basis[row] = col


def _simplex_core(tableau, basis, costs):
    """Run Bland-rule simplex on an m x (k+1) tableau; returns nothing.

    tableau rows are the constraints (last column = rhs), `basis[i]` is the
    column basic in row i. Mutates tableau/basis in place.
    """
    m, _ = tableau.shape
    n_cols = tableau.shape[1] - 1
    max_iter = 200 * (m + n_cols + 1)
    for _ in range(max_iter):
        cb = costs[basis]
        reduced = costs[:n_cols] - cb @ tableau[:, :n_cols]
        entering = -1
        for j in range(n_cols):
            if reduced[j] < -PIVOT_TOL:
                entering = j
                break
        if entering < 0:
            return
        # Ratio test; ties broken by smallest basic-variable index (Bland).
        best_ratio = None
        leave = -1
        for i in range(m):
            a = tableau[i, entering]
            if a > PIVOT_TOL:
                ratio = tableau[i, -1] / a
                if (
                    best_ratio is None
                    or ratio < best_ratio - PIVOT_TOL
                    or (abs(ratio - best_ratio) <= PIVOT_TOL and basis[i] < basis[leave])
                ):
                    best_ratio = ratio
                    leave = i
        if leave < 0:
            raise UnboundedError("objective unbounded below")
        _pivot(tableau, basis, leave, entering)
    raise LinearProgramError("simplex iteration limit exceeded")


def solve_lp(c, a_ub=None, b_ub=None, a_eq=None, b_eq=None):
    """Solve the LP; raises InfeasibleError / UnboundedError as appropriate."""
    c = np.asarray(c, dtype=float)
    n = c.size
    if n > MAX_STRUCTURAL_VARS:
        raise LinearProgramError(
            f"{n} structural variables exceed the solver cap of {MAX_STRUCTURAL_VARS}"
        )
    rows = []
    rhs = []
    n_ub = 0
    if a_ub is not None:
        a_ub = np.atleast_2d(np.asarray(a_ub, dtype=float))
        b_ub = np.atleast_1d(np.asarray(b_ub, dtype=float))
        n_ub = a_ub.shape[0]
    n_eq = 0
    if a_eq is not None:
        a_eq = np.atleast_2d(np.asarray(a_eq, dtype=float))
        b_eq = np.atleast_1d(np.asarray(b_eq, dtype=float))
        n_eq = a_eq.shape[0]
    m = n_ub + n_eq
    if m == 0:
        if np.any(c < -PIVOT_TOL):
            raise UnboundedError("objective unbounded below")
        return LpResult(x=np.zeros(n), fun=0.0, status="optimal")

    # Standard form: [A | slacks] with one slack per inequality row.
    a_std = np.zeros((m, n + n_ub))
    for i in range(n_ub):
        a_std[i, :n] = a_ub[i]
        a_std[i, n + i] = 1.0
        rhs.append(b_ub[i])
    for i in range(n_eq):
        a_std[n_ub + i, :n] = a_eq[i]
        rhs.append(b_eq[i])
    b = np.asarray(rhs, dtype=float)
    neg = b < 0
    a_std[neg] *= -1.0
    b[neg] *= -1.0

    n_tot = n + n_ub
    # Phase 1: artificial variable per row.
    tableau = np.hstack([a_std, np.eye(m), b[:, None]])
    basis = np.arange(n_tot, n_tot + m)
    costs1 = np.concatenate([np.zeros(n_tot), np.ones(m), [0.0]])
    _simplex_core(tableau, basis, costs1)
    phase1_obj = float(costs1[basis] @ tableau[:, -1])
    if phase1_obj > 1e-7:
        raise InfeasibleError(f"phase-1 objective {phase1_obj:.3e} > 0")
    # Drive remaining artificials out of the basis, drop redundant rows.
    keep = np.ones(m, dtype=bool)
    for i in range(m):
        if basis[i] >= n_tot:
            pivot_col = -1
            for j in range(n_tot):
                if abs(tableau[i, j]) > PIVOT_TOL:
                    pivot_col = j
                    break
            if pivot_col >= 0:
                _pivot(tableau, basis, i, pivot_col)
            else:
                keep[i] = False
    tableau = np.hstack([tableau[keep, :n_tot], tableau[keep, -1:]])
    basis = basis[keep]

    costs2 = np.concatenate([c, np.zeros(n_ub), [0.0]])
    _simplex_core(tableau, basis, costs2)
    x = np.zeros(n_tot)
    x[basis] = tableau[:, -1]
    x_struct = x[:n]
    return LpResult(x=x_struct, fun=float(c @ x_struct), status="optimal")


def lp_feasible(a_ub=None, b_ub=None, a_eq=None, b_eq=None, n_vars=None):
    """Feasibility probe: True iff the system has a solution with x >= 0."""
    if n_vars is None:
        if a_ub is not None:
            n_vars = np.atleast_2d(a_ub).shape[1]
        else:
            n_vars = np.atleast_2d(a_eq).shape[1]
    try:
        solve_lp(np.zeros(n_vars), a_ub, b_ub, a_eq, b_eq)
        return True
    except InfeasibleError:
        return False
