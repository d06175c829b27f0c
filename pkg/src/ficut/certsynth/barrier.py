"""Simulation-guided LP synthesis of polynomial certificate candidates.

Each sampled state x contributes two rows linear in the coefficient
vector c of V = sum_k c_k z_k:

* positivity  V(x) >= eps_pos * |x|^2
* decrease    dV/dt(x) <= -eps_dec * |x|^2

where dV/dt(x) = sum_k c_k grad z_k(x) . f(x).  Coefficients are boxed in
[-1, 1].  With ``pin_linear`` the degree-1 coefficients are fixed to zero:
a function with a strict minimum at the origin has zero gradient there.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from ..hp.ast import Term
from ..hp.evaluate import DomainError, compile_term
from ..simplex import OPTIMAL, linprog_max
from .certificates import BarrierCertificate

DEFAULT_EPS_POS = 1e-3
DEFAULT_EPS_DEC = 1e-3


@dataclass(frozen=True)
class LPRow:
    kind: str  # positivity | decrease
    coeffs: tuple[float, ...]
    rhs: float
    norm2: float
    provenance: tuple
    point: tuple[float, ...]


@dataclass
class LPProblem:
    vars: tuple[str, ...]
    basis: tuple[tuple[int, ...], ...]
    field: tuple[tuple[str, Term], ...]
    eps_pos: float = DEFAULT_EPS_POS
    eps_dec: float = DEFAULT_EPS_DEC
    objective: str = "margin"  # or "feasibility"
    pin_linear: bool = True
    eta: dict = field(default_factory=dict)
    rows: list[LPRow] = field(default_factory=list)

    def __post_init__(self):
        self.vars = tuple(self.vars)
        self.basis = tuple(tuple(m) for m in self.basis)
        self.field = tuple(self.field)
        fvars = [x for x, _ in self.field]
        if sorted(fvars) != sorted(self.vars):
            raise ValueError("field variables must match the certificate variables")
        order = {x: t for x, t in self.field}
        self._f = [compile_term(order[x], self.vars, self.eta) for x in self.vars]

    # row generation is a pure function of (point, kind), which makes
    # rows replayable from their provenance
    def rows_at(self, point: Sequence[float], provenance: tuple) -> list[LPRow]:
        x = np.asarray(point, dtype=float)
        try:
            f = np.array([g(tuple(x)) for g in self._f])
        except DomainError:
            return []
        n2 = float(x @ x)
        z = [float(np.prod(x ** np.array(m))) for m in self.basis]
        zdot = []
        for m in self.basis:
            total = 0.0
            for i, e in enumerate(m):
                if e == 0:
                    continue
                mm = list(m)
                mm[i] -= 1
                total += e * float(np.prod(x ** np.array(mm))) * f[i]
            zdot.append(total)
        pt = tuple(map(float, x))
        return [
            LPRow("positivity", tuple(-v for v in z), -self.eps_pos * n2, n2, provenance, pt),
            LPRow("decrease", tuple(zdot), -self.eps_dec * n2, n2, provenance, pt),
        ]

    def add_point(self, point, provenance: tuple) -> int:
        new = self.rows_at(point, provenance)
        self.rows.extend(new)
        return len(new)

    def replay(self, row: LPRow) -> LPRow:
        for r in self.rows_at(row.point, row.provenance):
            if r.kind == row.kind:
                return r
        raise ValueError("row cannot be replayed")

    def linear_indices(self) -> list[int]:
        return [k for k, m in enumerate(self.basis) if sum(m) == 1]

    def solve(self) -> "LPCandidate":
        """Two-phase simplex over s = c + 1 in [0, 2] (plus margin t)."""
        nb = len(self.basis)
        with_t = self.objective == "margin"
        ncol = nb + (1 if with_t else 0)
        A, b = [], []
        for r in self.rows:
            # sum a_k c_k <= rhs  with c = s - 1
            row = list(r.coeffs) + ([0.0] * (ncol - nb))
            if with_t and r.kind == "decrease":
                row[nb] = r.norm2
            A.append(row)
            b.append(r.rhs + sum(r.coeffs))
        for k in range(nb):
            row = [0.0] * ncol
            row[k] = 1.0
            A.append(row)
            b.append(2.0)
        if with_t:
            row = [0.0] * ncol
            row[nb] = 1.0
            A.append(row)
            b.append(1.0)
        A_eq, b_eq = [], []
        if self.pin_linear:
            for k in self.linear_indices():
                row = [0.0] * ncol
                row[k] = 1.0
                A_eq.append(row)
                b_eq.append(1.0)
        c = [0.0] * ncol
        if with_t:
            c[nb] = 1.0
        # scale rows so tiny |x|^2 samples do not fall under the pivot tolerance
        As, bs = [], []
        for row, rhs in zip(A, b):
            s = max(max(abs(v) for v in row), abs(rhs), 1e-300)
            As.append([v / s for v in row])
            bs.append(rhs / s)
        res = linprog_max(c, As, bs, A_eq, b_eq, eps=1e-12)
        degenerate = all(all(v == 0.0 for v in r.coeffs) for r in self.rows)
        if res.status != OPTIMAL:
            return LPCandidate("infeasible", None, None, degenerate, res.pivots, self)
        coeffs = np.array(res.x[:nb]) - 1.0
        coeffs[np.abs(coeffs) < 1e-12] = 0.0
        margin = float(res.x[nb]) if with_t else 0.0
        mx = float(np.max(np.abs(coeffs))) if nb else 0.0
        if mx > 0:
            coeffs = coeffs / mx
        return LPCandidate("feasible", tuple(map(float, coeffs)), margin, degenerate, res.pivots, self)


@dataclass
class LPCandidate:
    status: str
    coeffs: Optional[tuple[float, ...]]
    margin: Optional[float]
    degenerate: bool
    pivots: int
    problem: LPProblem

    @property
    def feasible(self) -> bool:
        return self.status == "feasible"

    def certificate(self, **kw) -> BarrierCertificate:
        if not self.feasible:
            raise ValueError("LP is infeasible")
        p = self.problem
        return BarrierCertificate(p.vars, p.basis, self.coeffs, **kw)


def sample_points(traces, vars: Sequence[str], max_points: int = 150) -> list[tuple[tuple, tuple]]:
    """Deduplicated (point, provenance) pairs, thinned evenly to ``max_points``."""
    pts, seen = [], set()
    for ti, tr in enumerate(traces):
        for si, s in enumerate(tr.states):
            p = tuple(float(s[v]) for v in vars)
            if p in seen:
                continue
            seen.add(p)
            pts.append((p, ("trace", ti, si)))
    if len(pts) > max_points:
        step = len(pts) / max_points
        pts = [pts[int(k * step)] for k in range(max_points)]
    return pts


def lp_candidate(
    traces,
    basis: Sequence[tuple[int, ...]],
    field: Sequence[tuple[str, Term]],
    margins: tuple[float, float] = (DEFAULT_EPS_POS, DEFAULT_EPS_DEC),
    vars: Optional[Sequence[str]] = None,
    objective: str = "margin",
    pin_linear: bool = True,
    max_points: int = 150,
    eta: Optional[dict] = None,
) -> LPCandidate:
    """Build the sample LP from ``traces`` and solve it."""
    if not traces:
        raise ValueError("at least one trace is required")
    vars = tuple(vars) if vars is not None else tuple(x for x, _ in field)
    for m in basis:
        if not any(m):
            raise ValueError("the basis must exclude the constant monomial")
    prob = LPProblem(vars, tuple(basis), tuple(field), margins[0], margins[1], objective,
                     pin_linear, dict(eta or {}))
    for p, prov in sample_points(traces, vars, max_points):
        prob.add_point(p, prov)
    return prob.solve()
