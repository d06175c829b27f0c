"""Delta-complete satisfiability checking of real constraint conjunctions.

``check`` answers Unsat (no point of the domain satisfies the system) or
DeltaSat (a box of width at most delta whose midpoint satisfies every
constraint weakened by delta).  Running out of boxes raises
``ResourceLimit`` and is never reported as Unsat.

Before branch and prune, polynomial constraints are expanded into
monomial sums.  Two sound root-level tests run on the expansion:

* a linear relaxation that treats each monomial as an independent
  variable bounded by its exact range over the domain, solved exactly
  with rational arithmetic; infeasibility proves Unsat;
* for constraints whose expansion starts at degree two with a positive
  definite quadratic part, a per-box test that bounds the higher-order
  terms by the box radius and prunes boxes near the origin.

Nonlinear constraints also carry interval partial derivatives; a box the
natural enclosure cannot decide is retried with the mean-value form
f(m) + grad f(X) . (X - m), which is tight on small boxes where
cancellation makes the natural enclosure useless.
"""
from __future__ import annotations

import contextvars
import math
import os
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from .. import poly as P
from ..hp.ast import (
    And, Box as BoxF, Cmp, Const, Diamond, Exists, FalseF, Forall, Formula,
    Implies, Not, Or, Sub, Term, TrueF, Var, subst_lvars_term, term_lvars, term_vars,
)
from ..hp.evaluate import eval_term
from ..hp.printer import pretty_print
from ..simplex import INFEASIBLE, OPTIMAL, linprog_max
from . import kernel
from .interval import Box
from .tape import compile_tape

DEFAULT_DELTA = 1e-4
DEFAULT_EPS = 1e-6
DEFAULT_BOX_BUDGET = 10 ** 6

_REL_CODE = {"<=": 0, "<": 1, "=": 2}


class ResourceLimit(RuntimeError):
    """The box budget ran out before a verdict was reached."""

    def __init__(self, msg: str, stats: dict):
        super().__init__(msg)
        self.stats = stats


@dataclass(frozen=True)
class Constraint:
    """``expr rel 0`` with rel one of '<=', '<', '='."""

    expr: Term
    rel: str

    def __post_init__(self):
        if self.rel not in _REL_CODE:
            raise ValueError(f"bad relation {self.rel!r}")

    def vars(self) -> set[str]:
        return term_vars(self.expr) | term_lvars(self.expr)

    def __str__(self) -> str:
        return f"{pretty_print(self.expr)} {self.rel} 0"


@dataclass
class ConstraintSystem:
    constraints: list[Constraint]
    domain: Box
    delta: float = DEFAULT_DELTA

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError("delta must be positive")
        names = set(self.domain.vars)
        for c in self.constraints:
            missing = c.vars() - names
            if missing:
                raise ValueError(f"constraint {c} uses variables outside the domain: {sorted(missing)}")
        for a, b in zip(self.domain.lo, self.domain.hi):
            if not (math.isfinite(a) and math.isfinite(b)):
                raise ValueError("domain must be bounded")


@dataclass(frozen=True)
class Unsat:
    stats: dict = field(default_factory=dict, compare=False)

    @property
    def is_unsat(self) -> bool:
        return True


@dataclass(frozen=True)
class DeltaSat:
    witness: Box
    stats: dict = field(default_factory=dict, compare=False)

    @property
    def is_unsat(self) -> bool:
        return False


DeltaResult = Union[Unsat, DeltaSat]


def box_budget() -> int:
    v = os.environ.get("FICUT_BOX_BUDGET")
    return int(float(v)) if v else DEFAULT_BOX_BUDGET


# ------------------------------------------------------------ query dumps

_DUMP: contextvars.ContextVar = contextvars.ContextVar("ficut_dump", default=None)


class QueryDump:
    """Writes each submitted query to ``directory`` as numbered text files."""

    def __init__(self, directory: str | Path):
        self.dir = Path(directory)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.count = 0

    def write(self, sys: ConstraintSystem, verdict: str):
        self.count += 1
        lines = [f"# delta {sys.delta!r}", f"# verdict {verdict}"]
        for n, a, b in zip(sys.domain.vars, sys.domain.lo, sys.domain.hi):
            lines.append(f"# domain {n} in [{a!r}, {b!r}]")
        lines += [str(c) for c in sys.constraints]
        (self.dir / f"query_{self.count:05d}.txt").write_text("\n".join(lines) + "\n")

    def __enter__(self):
        self._token = _DUMP.set(self)
        return self

    def __exit__(self, *exc):
        _DUMP.reset(self._token)


# --------------------------------------------------------- normalization


def normalize_atom(f: Cmp) -> Constraint:
    """Move everything to one side: a<=b -> a-b<=0, a>b -> b-a<0, ..."""
    if f.op in ("<=", "<", "="):
        return Constraint(Sub(f.left, f.right), f.op)
    flipped = {">=": "<=", ">": "<"}[f.op]
    return Constraint(Sub(f.right, f.left), flipped)


def nnf(f: Formula, negate: bool = False) -> Formula:
    """Negation normal form over comparisons; rejects modal formulas."""
    if isinstance(f, TrueF):
        return FalseF() if negate else f
    if isinstance(f, FalseF):
        return TrueF() if negate else f
    if isinstance(f, Cmp):
        if not negate:
            return f
        if f.op == "=":
            return Or(Cmp("<", f.left, f.right), Cmp(">", f.left, f.right))
        neg = {"<=": ">", "<": ">=", ">=": "<", ">": "<="}[f.op]
        return Cmp(neg, f.left, f.right)
    if isinstance(f, Not):
        return nnf(f.arg, not negate)
    if isinstance(f, And):
        a, b = nnf(f.left, negate), nnf(f.right, negate)
        return Or(a, b) if negate else And(a, b)
    if isinstance(f, Or):
        a, b = nnf(f.left, negate), nnf(f.right, negate)
        return And(a, b) if negate else Or(a, b)
    if isinstance(f, Implies):
        return nnf(Or(Not(f.left), f.right), negate)
    if isinstance(f, (BoxF, Diamond, Forall, Exists)):
        raise ValueError("arithmetic checks need modality- and quantifier-free formulas")
    raise TypeError(f"not a formula: {f!r}")


def dnf(f: Formula) -> list[list[Cmp]]:
    """Disjunctive normal form as a list of atom conjunctions."""
    f = nnf(f)

    def go(g: Formula) -> list[list[Cmp]]:
        if isinstance(g, TrueF):
            return [[]]
        if isinstance(g, FalseF):
            return []
        if isinstance(g, Cmp):
            return [[g]]
        if isinstance(g, Or):
            return go(g.left) + go(g.right)
        if isinstance(g, And):
            return [a + b for a in go(g.left) for b in go(g.right)]
        raise TypeError(f"unexpected {g!r}")

    return go(f)


# ------------------------------------------------------- preprocessing


@dataclass
class _Prepared:
    expr: Term
    rel: str
    poly: Optional[dict]


def _prepare(c: Constraint) -> _Prepared:
    p = P.to_poly(c.expr)
    if p is None:
        return _Prepared(c.expr, c.rel, None)
    return _Prepared(P.to_term(p), c.rel, p)


def _const_verdict(p: _Prepared) -> Optional[bool]:
    """True/False for variable-free constraints, None otherwise."""
    if p.poly is not None:
        if set(p.poly) - {()}:
            return None
        v = p.poly.get((), Fraction(0))
    else:
        if term_vars(p.expr) or term_lvars(p.expr):
            return None
        try:
            v = eval_term({}, {}, p.expr)
        except ArithmeticError:
            return False
    if p.rel == "<=":
        return v <= 0
    if p.rel == "<":
        return v < 0
    return v == 0


def _frac_pow_range(lo: Fraction, hi: Fraction, e: int) -> tuple[Fraction, Fraction]:
    a, b = lo ** e, hi ** e
    if e % 2 == 1 or lo >= 0:
        return (a, b)
    if hi <= 0:
        return (b, a)
    return (Fraction(0), max(a, b))


def _mono_range(m, ranges) -> tuple[Fraction, Fraction]:
    lo, hi = Fraction(1), Fraction(1)
    for node, e in m:
        a, b = _frac_pow_range(*ranges[node.name], e)
        ps = (lo * a, lo * b, hi * a, hi * b)
        lo, hi = min(ps), max(ps)
    return lo, hi


_MAX_LP_MONOS = 60


def _linear_relaxation_unsat(prepared: list[_Prepared], domain: Box) -> tuple[bool, dict]:
    polys = [p for p in prepared if p.poly is not None]
    if not polys:
        return False, {}
    monos = sorted({m for p in polys for m in p.poly if m}, key=lambda m: (P.mono_degree(m), str(m)))
    if not monos or len(monos) > _MAX_LP_MONOS:
        return False, {}
    dom = domain.as_dict()
    ranges = {n: (Fraction(a), Fraction(b)) for n, (a, b) in dom.items()}
    col = {m: i for i, m in enumerate(monos)}
    bounds = [_mono_range(m, ranges) for m in monos]
    strict = any(p.rel == "<" for p in polys)
    nvar = len(monos) + (1 if strict else 0)
    t_col = len(monos)
    A, b = [], []

    def add_row(coeffs: dict, c0: Fraction, with_t: bool):
        # sum coeffs[m] * y_m + c0 (+ t) <= 0, with y_m = L_m + z_m
        row = [Fraction(0)] * nvar
        rhs = -c0
        for m, c in coeffs.items():
            j = col[m]
            row[j] += c
            rhs -= c * bounds[j][0]
        if with_t:
            row[t_col] = Fraction(1)
        A.append(row)
        b.append(rhs)

    for p in polys:
        coeffs = {m: c for m, c in p.poly.items() if m}
        c0 = p.poly.get((), Fraction(0))
        if p.rel == "=":
            add_row(coeffs, c0, False)
            add_row({m: -c for m, c in coeffs.items()}, -c0, False)
        else:
            add_row(coeffs, c0, p.rel == "<")
    # secant and tangent cuts linking x^2 to x when both occur
    for m in monos:
        if len(m) == 1 and m[0][1] == 2:
            base = ((m[0][0], 1),)
            if base not in col:
                continue
            lo, hi = ranges[m[0][0].name]
            # x^2 <= (lo+hi) x - lo*hi
            add_row({m: Fraction(1), base: -(lo + hi)}, lo * hi, False)
            for a in sorted({lo, hi, (lo + hi) / 2}):
                # x^2 >= 2 a x - a^2
                add_row({m: Fraction(-1), base: 2 * a}, -a * a, False)
    for j, (lo, hi) in enumerate(bounds):
        row = [Fraction(0)] * nvar
        row[j] = Fraction(1)
        A.append(row)
        b.append(hi - lo)
    if strict:
        row = [Fraction(0)] * nvar
        row[t_col] = Fraction(1)
        A.append(row)
        b.append(Fraction(1))
    c = [0] * nvar
    if strict:
        c[t_col] = 1

    def verdict(res) -> bool:
        if res.status == INFEASIBLE:
            return True
        return strict and res.status == OPTIMAL and res.objective <= 0

    fres = linprog_max(c, [[float(v) for v in r] for r in A], [float(v) for v in b])
    screen = fres.status == INFEASIBLE or (strict and fres.status == OPTIMAL and fres.objective <= 1e-9)
    if not screen:
        return False, {}
    eres = linprog_max(c, A, b, exact=True)
    return verdict(eres), {"lp_pivots": eres.pivots, "lp_monomials": len(monos)}


def _exact_pd(H: list[list[Fraction]]) -> bool:
    """Positive definiteness by exact LDL^T (all pivots > 0)."""
    n = len(H)
    M = [row[:] for row in H]
    for k in range(n):
        piv = M[k][k]
        if piv <= 0:
            return False
        for i in range(k + 1, n):
            f = M[i][k] / piv
            if f:
                for j in range(k + 1, n):
                    M[i][j] -= f * M[k][j]
    return True


def _round_up(x: float) -> float:
    return math.nextafter(x, math.inf)


def quad_dominance(p: dict, var_index: dict[str, int]):
    """(lambda, var indices, [(degree, K)]) or None when not applicable.

    Applies when p has no constant or linear part and a positive definite
    quadratic part xᵀHx; then p(x) >= |x|^2 (lambda - sum K_d |x|^(d-2)).
    """
    if not p or () in p or any(P.mono_degree(m) == 1 for m in p):
        return None
    if not any(P.mono_degree(m) == 2 for m in p):
        return None
    names = sorted({v.name for v in P.variables(p)})
    H = P.quadratic_matrix(p, names)
    Hf = np.array([[float(v) for v in r] for r in H])
    lam_est = float(np.linalg.eigvalsh(Hf).min()) if len(names) else 0.0
    if not lam_est > 0:
        return None
    lam = 0.5 * lam_est
    Hs = [[H[i][j] - (Fraction(lam) if i == j else 0) for j in range(len(names))] for i in range(len(names))]
    if not _exact_pd(Hs):
        return None
    higher = []
    for m, c in p.items():
        d = P.mono_degree(m)
        if d >= 3:
            higher.append((d, _round_up(float(abs(c)))))
    return lam, [var_index[n] for n in names], higher


# ------------------------------------------------------------------ check


def _gradients(prepared: list, var_index: dict[str, int]):
    """Partial-derivative terms and their (gptr, gvar) layout."""
    from .lie import diff
    terms, gptr, gvar = [], [0], []
    for p in prepared:
        if p.poly is None or P.degree(p.poly) >= 2:
            names = sorted(term_vars(p.expr) | term_lvars(p.expr))
            expr = subst_lvars_term(p.expr, {n: Var(n) for n in term_lvars(p.expr)})
            for n in names:
                terms.append(diff(expr, n))
                gvar.append(var_index[n])
        gptr.append(len(terms))
    return terms, gptr, gvar


def check(sys: ConstraintSystem, max_boxes: Optional[int] = None, relaxation: bool = True,
          mean_value: bool = True) -> DeltaResult:
    """Decide the system up to delta; see the module docstring."""
    budget = box_budget() if max_boxes is None else max_boxes
    stats: dict = {"backend": kernel.BACKEND, "constraints": len(sys.constraints)}
    prepared = []
    for c in sys.constraints:
        p = _prepare(c)
        v = _const_verdict(p)
        if v is False:
            stats.update(method="constant", boxes=0)
            return _done(sys, Unsat(stats))
        if v is None:
            prepared.append(p)
    if not prepared:
        stats.update(method="constant", boxes=0)
        return _done(sys, DeltaSat(sys.domain if sys.domain.width <= sys.delta else _point_box(sys.domain), stats))
    if relaxation:
        unsat, lp_stats = _linear_relaxation_unsat(prepared, sys.domain)
        stats.update(lp_stats)
        if unsat:
            stats.update(method="linear-relaxation", boxes=0)
            return _done(sys, Unsat(stats))
    var_index = {n: i for i, n in enumerate(sys.domain.vars)}
    tape = compile_tape([p.expr for p in prepared], var_index)
    rels = np.array([_REL_CODE[p.rel] for p in prepared], dtype=np.int32)
    qflag, qlam, qvp, qv, qtp, qdeg, qK = [], [], [0], [], [0], [], []
    for p in prepared:
        qd = quad_dominance(p.poly, var_index) if p.poly is not None else None
        if qd is None:
            qflag.append(0)
            qlam.append(0.0)
        else:
            lam, idx, higher = qd
            qflag.append(1)
            qlam.append(lam)
            qv.extend(idx)
            for d, k in higher:
                qdeg.append(d)
                qK.append(k)
        qvp.append(len(qv))
        qtp.append(len(qdeg))
    gargs = ()
    if mean_value:
        gterms, gptr, gvar = _gradients(prepared, var_index)
        if gterms:
            gt = compile_tape(gterms, var_index)
            gargs = (gt.op, gt.a, gt.b, gt.val, np.array(gptr, dtype=np.int32),
                     np.array(gvar, dtype=np.int32), gt.outputs)
    status, wlo, whi, boxes, depth = kernel.solve(
        tape.op, tape.a, tape.b, tape.val, tape.outputs, rels,
        np.array(qflag, dtype=np.int32), np.array(qlam, dtype=np.float64),
        np.array(qvp, dtype=np.int32), np.array(qv, dtype=np.int32),
        np.array(qtp, dtype=np.int32), np.array(qdeg, dtype=np.int32),
        np.array(qK, dtype=np.float64),
        np.array(sys.domain.lo, dtype=np.float64), np.array(sys.domain.hi, dtype=np.float64),
        float(sys.delta), int(budget), *gargs,
    )
    stats.update(method="branch-and-prune", boxes=int(boxes), max_depth=int(depth))
    if status == kernel._kernel_py.STATUS_UNSAT:
        return _done(sys, Unsat(stats))
    if status == kernel._kernel_py.STATUS_SAT:
        return _done(sys, DeltaSat(Box(sys.domain.vars, wlo, whi), stats))
    d = _DUMP.get()
    if d is not None:
        d.write(sys, "resource-limit")
    raise ResourceLimit(f"box budget of {budget} exhausted", stats)


def _point_box(b: Box) -> Box:
    mid = b.midpoint()
    return Box(b.vars, [mid[n] for n in b.vars], [mid[n] for n in b.vars])


def _done(sys: ConstraintSystem, res: DeltaResult) -> DeltaResult:
    d = _DUMP.get()
    if d is not None:
        d.write(sys, "unsat" if res.is_unsat else "delta-sat")
    return res


def weakened_ok(sys: ConstraintSystem, point: dict[str, float]) -> bool:
    """Does ``point`` satisfy every constraint relaxed by delta?

    Uses interval evaluation at the point, as the witness contract does.
    """
    from .interval import interval_eval

    env = {n: (point[n], point[n]) for n in sys.domain.vars}
    for c in sys.constraints:
        iv = interval_eval(c.expr, env)
        if iv.hi > sys.delta:
            return False
        if c.rel == "=" and iv.lo < -sys.delta:
            return False
    return True


def check_formula(f: Formula, domain: Box, delta: float = DEFAULT_DELTA,
                  max_boxes: Optional[int] = None) -> DeltaResult:
    """Satisfiability of a quantifier- and modality-free formula.

    The formula is split into disjuncts; Unsat only if every disjunct is.
    Each disjunct is checked over the domain projected onto its own
    variables.  Statistics of all submitted queries are summed.
    """
    total = {"queries": 0, "boxes": 0}
    for atoms in dnf(f):
        cons = [normalize_atom(a) for a in atoms]
        used = set().union(*(c.vars() for c in cons)) if cons else set()
        sys = ConstraintSystem(cons, domain.project(used), delta)
        res = check(sys, max_boxes)
        total["queries"] += 1
        total["boxes"] += res.stats.get("boxes", 0)
        if not res.is_unsat:
            return DeltaSat(res.witness, {**res.stats, **total})
    return Unsat(total)


def domain_box(names: Sequence[str], domain: dict[str, tuple[float, float]]) -> Box:
    missing = [n for n in names if n not in domain]
    if missing:
        raise KeyError(f"no domain declared for {missing}")
    return Box(tuple(names), [domain[n][0] for n in names], [domain[n][1] for n in names])
