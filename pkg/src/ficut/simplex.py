"""Dense two-phase primal simplex with Bland's anti-cycling rule.

Works over floats (with a tolerance) or over ``fractions.Fraction``
(exactly, tolerance zero; numpy object arrays).  Problems here have at
most a few hundred rows and a few dozen columns, so a dense tableau is
adequate.

Standard form handled::

    maximize    c . x
    subject to  A_ub x <= b_ub,  A_eq x = b_eq,  x >= 0
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

OPTIMAL, INFEASIBLE, UNBOUNDED = "optimal", "infeasible", "unbounded"


@dataclass
class LPResult:
    status: str
    x: Optional[list] = None
    objective: Optional[object] = None
    pivots: int = 0
    basis: list = field(default_factory=list)


class _Tableau:
    """Tableau rows as a 2-D numpy array (float64, or object for Fractions)."""

    def __init__(self, rows, rhs, basis, ncols, zero, eps):
        dtype = object if isinstance(zero, Fraction) else float
        self.T = np.array(rows, dtype=dtype).reshape(len(rows), ncols)
        self.rhs = np.array(rhs, dtype=dtype)
        self.basis = basis
        self.ncols = ncols
        self.zero = zero
        self.eps = eps
        self.pivots = 0

    @property
    def rows(self):
        return self.T

    def pivot(self, r: int, j: int):
        p = self.T[r, j]
        self.T[r] = self.T[r] / p
        self.rhs[r] = self.rhs[r] / p
        col = self.T[:, j].copy()
        col[r] = 0
        nz = np.nonzero(col != 0)[0]
        if len(nz):
            self.T[nz] -= np.outer(col[nz], self.T[r])
            self.rhs[nz] -= col[nz] * self.rhs[r]
        self.basis[r] = j
        self.pivots += 1

    def reduced_costs(self, cost, allowed):
        # d_j = c_j - sum_i c_{B(i)} a_ij
        cb = np.array([cost[b] for b in self.basis], dtype=self.T.dtype)
        d = np.array(cost, dtype=self.T.dtype) - (cb @ self.T if len(cb) else 0)
        return [d[j] if allowed[j] else None for j in range(self.ncols)]

    def optimize(self, cost, allowed) -> str:
        """Maximize ``cost`` over the current basis using Bland's rule."""
        eps = self.eps
        while True:
            d = self.reduced_costs(cost, allowed)
            enter = next((j for j in range(self.ncols) if d[j] is not None and d[j] > eps), None)
            if enter is None:
                return OPTIMAL
            best = None
            col = self.T[:, enter]
            for i in np.nonzero(col > eps)[0]:
                ratio = self.rhs[i] / col[i]
                key = (ratio, self.basis[i])
                if best is None or key < best[0]:
                    best = (key, int(i))
            if best is None:
                return UNBOUNDED
            self.pivot(best[1], enter)

    def objective(self, cost):
        z = self.zero
        for i, b in enumerate(self.basis):
            z = z + cost[b] * self.rhs[i]
        return z

    def delete_row(self, i: int):
        self.T = np.delete(self.T, i, axis=0)
        self.rhs = np.delete(self.rhs, i)
        del self.basis[i]


def linprog_max(
    c: Sequence,
    A_ub: Sequence[Sequence] = (),
    b_ub: Sequence = (),
    A_eq: Sequence[Sequence] = (),
    b_eq: Sequence = (),
    exact: bool = False,
    eps: float = 1e-9,
) -> LPResult:
    """Solve the standard-form LP above with a two-phase tableau."""
    conv = Fraction if exact else float
    zero = conv(0)
    tol = Fraction(0) if exact else eps
    n = len(c)
    raw = [([conv(v) for v in r], conv(b), "ub") for r, b in zip(A_ub, b_ub)]
    raw += [([conv(v) for v in r], conv(b), "eq") for r, b in zip(A_eq, b_eq)]
    m = len(raw)
    # columns: x (n) | slack/surplus (one per ub row) | artificial (as needed)
    n_slack = sum(1 for _, _, k in raw if k == "ub")
    rows, rhs, basis = [], [], []
    art_rows = []
    slack_col = n
    for r, b, kind in raw:
        row = r + [zero] * n_slack
        sign = 1
        if b < 0:
            sign = -1
            row = [-v for v in row]
            b = -b
        if kind == "ub":
            row[slack_col] = conv(sign)
            if sign == 1:
                basis.append(slack_col)
            else:
                basis.append(None)
                art_rows.append(len(rows))
            slack_col += 1
        else:
            basis.append(None)
            art_rows.append(len(rows))
        rows.append(row)
        rhs.append(b)
    n_art = len(art_rows)
    ncols = n + n_slack + n_art
    for i in range(m):
        rows[i] = rows[i] + [zero] * n_art
    for k, i in enumerate(art_rows):
        col = n + n_slack + k
        rows[i][col] = conv(1)
        basis[i] = col
    tab = _Tableau(rows, rhs, basis, ncols, zero, tol)
    allowed = [True] * ncols
    if n_art:
        cost1 = [zero] * (n + n_slack) + [conv(-1)] * n_art
        tab.optimize(cost1, allowed)
        if tab.objective(cost1) < -tol:
            return LPResult(INFEASIBLE, pivots=tab.pivots)
        # drive zero-level artificials out of the basis
        first_art = n + n_slack
        i = 0
        while i < len(tab.basis):
            if tab.basis[i] >= first_art:
                j = next((j for j in range(first_art) if abs(tab.rows[i][j]) > tol), None)
                if j is None:  # redundant row
                    tab.delete_row(i)
                    continue
                tab.pivot(i, j)
            i += 1
        for j in range(first_art, ncols):
            allowed[j] = False
    cost2 = [conv(v) for v in c] + [zero] * (n_slack + n_art)
    status = tab.optimize(cost2, allowed)
    if status == UNBOUNDED:
        return LPResult(UNBOUNDED, pivots=tab.pivots)
    x = [zero] * n
    for i, b in enumerate(tab.basis):
        if b < n:
            x[b] = conv(tab.rhs[i])
    return LPResult(OPTIMAL, x, conv(tab.objective(cost2)), tab.pivots, list(tab.basis))
