"""Validity of modality-free goals via icp on the negation.

Before a query reaches the interval solver the formula is simplified:
ground comparisons are folded, equalities ``x = c`` with ground ``c`` are
substituted away, and mode variables are case-split over their declared
values.  Disjunctions are split lazily so that a conjunction of atoms is
refuted once before its disjunctive remainder is expanded.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

from ..hp.ast import (
    FALSE, TRUE, And, Cmp, Const, FalseF, Formula, Implies, LVar, Not, Or, TrueF, Var,
    conj, conjuncts, formula_vars, iter_term, subst_formula,
)
from ..hp.evaluate import DomainError, eval_formula, eval_term
from ..hp.printer import pretty_print
from ..icp.interval import Box
from ..icp.solver import DEFAULT_DELTA, ResourceLimit, check_formula, nnf

UNSAT, DELTA_SAT, BUDGET, ERROR = "unsat", "delta-sat", "budget", "error"


def _ground(t) -> bool:
    return not any(isinstance(s, (Var, LVar)) for s in iter_term(t))


def _value(t) -> Optional[float]:
    try:
        return eval_term({}, {}, t)
    except DomainError:
        return None


def simplify(f: Formula) -> Formula:
    """Fold ground comparisons and boolean constants."""
    if isinstance(f, (TrueF, FalseF)):
        return f
    if isinstance(f, Cmp):
        if _ground(f.left) and _ground(f.right):
            a, b = _value(f.left), _value(f.right)
            if a is not None and b is not None:
                return TRUE if eval_formula({}, {}, Cmp(f.op, Const(a), Const(b))) else FALSE
        return f
    if isinstance(f, Not):
        a = simplify(f.arg)
        if isinstance(a, TrueF):
            return FALSE
        if isinstance(a, FalseF):
            return TRUE
        return Not(a)
    if isinstance(f, And):
        a, b = simplify(f.left), simplify(f.right)
        if FALSE in (a, b):
            return FALSE
        if a == TRUE:
            return b
        return a if b == TRUE else And(a, b)
    if isinstance(f, Or):
        a, b = simplify(f.left), simplify(f.right)
        if TRUE in (a, b):
            return TRUE
        if a == FALSE:
            return b
        return a if b == FALSE else Or(a, b)
    if isinstance(f, Implies):
        a, b = simplify(f.left), simplify(f.right)
        if a == FALSE or b == TRUE:
            return TRUE
        if a == TRUE:
            return b
        return Not(a) if b == FALSE else Implies(a, b)
    return f


def ground_equalities(f: Formula) -> dict[str, float]:
    """Top-level conjuncts ``x = c`` (either orientation) with ground ``c``."""
    out: dict[str, float] = {}
    for c in conjuncts(f):
        if not isinstance(c, Cmp) or c.op != "=":
            continue
        for a, b in ((c.left, c.right), (c.right, c.left)):
            if isinstance(a, Var) and _ground(b):
                v = _value(b)
                if v is not None and a.name not in out:
                    out[a.name] = v
                break
    return out


def substitute_values(f: Formula, values: dict[str, float]) -> Formula:
    if not values:
        return f
    return simplify(subst_formula(f, {k: Const(v) for k, v in values.items()}))


@dataclass
class Verdict:
    status: str
    witness: Optional[dict] = None
    stats: dict = field(default_factory=dict)
    detail: str = ""

    @property
    def unsat(self) -> bool:
        return self.status == UNSAT


class ArithChecker:
    """Satisfiability over the declared domain, with mode case splits.

    ``modes`` maps a mode variable to its admissible values; such a
    variable is never handed to the interval solver.
    """

    def __init__(self, domain: dict[str, tuple[float, float]], modes: Optional[dict] = None,
                 delta: float = DEFAULT_DELTA, max_boxes: Optional[int] = None):
        self.domain = dict(domain)
        self.modes = {k: tuple(sorted(v)) for k, v in (modes or {}).items()}
        self.delta = delta
        self.max_boxes = max_boxes
        self.cache: dict[str, Verdict] = {}
        self.queries = 0
        self.boxes = 0

    def add_variable(self, name: str, rng: tuple[float, float]):
        self.domain[name] = rng

    # -------------------------------------------------------------- public

    def valid(self, assume: Formula, concl: Formula) -> Verdict:
        """Unsat of ``assume & !concl`` means the implication is valid."""
        return self.satisfiable(conj(assume, Not(concl)))

    def satisfiable(self, f: Formula) -> Verdict:
        key = pretty_print(f)
        hit = self.cache.get(key)
        if hit is not None:
            return hit
        stats = {"queries": 0, "boxes": 0}
        res = self._search([simplify(nnf(f))], {}, stats)
        res.stats = {**stats, **res.stats}
        self.cache[key] = res
        return res

    # ------------------------------------------------------------ internals

    def _search(self, todo: list[Formula], fixed: dict[str, float], stats: dict) -> Verdict:
        atoms: list[Cmp] = []
        ors: list[Or] = []
        stack = list(todo)
        while stack:
            g = stack.pop(0)
            if isinstance(g, TrueF):
                continue
            if isinstance(g, FalseF):
                return Verdict(UNSAT)
            if isinstance(g, And):
                stack[:0] = [g.left, g.right]
            elif isinstance(g, Or):
                ors.append(g)
            elif isinstance(g, Cmp):
                atoms.append(g)
            else:
                return Verdict(ERROR, detail=f"unsupported formula {pretty_print(g)}")
        # substitute ground equalities on variables
        values = ground_equalities(conj(*atoms))
        if values:
            for name, v in values.items():
                if name in self.modes:
                    if v not in self.modes[name]:
                        return Verdict(UNSAT)
                elif name in self.domain:
                    lo, hi = self.domain[name]
                    if not lo <= v <= hi:
                        return Verdict(UNSAT)
            rest = [substitute_values(a, values) for a in atoms + ors]
            return self._search(rest, {**fixed, **values}, stats)
        # split the first undetermined mode variable
        used = set()
        for a in atoms + ors:
            used |= formula_vars(a)
        for m in sorted(used):
            if m in self.modes:
                res = None
                for v in self.modes[m]:
                    sub = [substitute_values(a, {m: v}) for a in atoms + ors]
                    r = self._search(sub, {**fixed, m: v}, stats)
                    if not r.unsat and (res is None or r.status == DELTA_SAT):
                        res = r
                    if r.status == DELTA_SAT:
                        return r
                return res or Verdict(UNSAT)
        if ors:
            base = self._check(atoms, fixed, stats) if atoms else Verdict(DELTA_SAT)
            if base.status in (UNSAT, ERROR):
                return base
            first, others = ors[0], ors[1:]
            pending = None
            for side in (first.left, first.right):
                r = self._search(atoms + [side] + others, fixed, stats)
                if r.status == DELTA_SAT:
                    return r
                if not r.unsat:
                    pending = pending or r
            return pending or Verdict(UNSAT)
        return self._check(atoms, fixed, stats)

    def _check(self, atoms: list[Cmp], fixed: dict, stats: dict) -> Verdict:
        if not atoms:
            return Verdict(DELTA_SAT, witness=dict(sorted(fixed.items())))
        groups = _components(atoms)
        if len(groups) > 1:
            # variable-disjoint parts are satisfiable independently
            wit = dict(fixed)
            pending = None
            for g in sorted(groups, key=len):
                r = self._check_one(g, fixed, stats)
                if r.status in (UNSAT, ERROR):
                    return r
                if r.status == BUDGET:
                    pending = pending or r
                else:
                    wit.update(r.witness or {})
            return pending or Verdict(DELTA_SAT, witness=dict(sorted(wit.items())))
        return self._check_one(atoms, fixed, stats)

    def _check_one(self, atoms: list[Cmp], fixed: dict, stats: dict) -> Verdict:
        f = conj(*atoms)
        names = sorted(formula_vars(f) | {n for a in atoms for n in _lvars(a)})
        missing = [n for n in names if n not in self.domain]
        if missing:
            return Verdict(ERROR, detail=f"no domain declared for {', '.join(missing)}")
        box = Box(tuple(names), [self.domain[n][0] for n in names], [self.domain[n][1] for n in names])
        self.queries += 1
        stats["queries"] += 1
        try:
            res = check_formula(f, box, self.delta, self.max_boxes)
        except ResourceLimit as e:
            stats["boxes"] += e.stats.get("boxes", 0)
            self.boxes += e.stats.get("boxes", 0)
            return Verdict(BUDGET, detail=str(e))
        nb = res.stats.get("boxes", 0)
        stats["boxes"] += nb
        self.boxes += nb
        if res.is_unsat:
            return Verdict(UNSAT)
        wit = {n: list(iv) for n, iv in res.witness.to_json().items()}
        wit.update({k: v for k, v in fixed.items()})
        return Verdict(DELTA_SAT, witness=dict(sorted(wit.items())))


def _components(atoms: list[Cmp]) -> list[list[Cmp]]:
    """Group atoms into classes connected by shared variables."""
    groups: list[tuple[set, list]] = []
    for a in atoms:
        vs = formula_vars(a) | _lvars(a)
        merged = (set(vs), [a])
        rest = []
        for g in groups:
            if g[0] & vs:
                merged[0].update(g[0])
                merged[1][:0] = g[1]
            else:
                rest.append(g)
        groups = rest + [merged]
    return [g[1] for g in groups]


def _lvars(f: Formula) -> set[str]:
    from ..hp.ast import formula_terms
    return {t.name for term in formula_terms(f) for t in iter_term(term) if isinstance(t, LVar)}


def exact_counterexample(f: Formula, witness: Optional[dict], lvars=()) -> bool:
    """Does the witness midpoint satisfy ``f`` exactly (a genuine model)?"""
    if not witness:
        return False
    nu, eta = {}, {}
    for k, v in witness.items():
        x = 0.5 * (v[0] + v[1]) if isinstance(v, (list, tuple)) else float(v)
        (eta if k in lvars else nu)[k] = x
    try:
        return bool(eval_formula(nu, eta, nnf(f)))
    except (DomainError, KeyError, ValueError):
        return False


def finite(x) -> bool:
    return isinstance(x, (int, float)) and math.isfinite(x)
