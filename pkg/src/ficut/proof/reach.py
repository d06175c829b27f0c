"""Bounded-time reach envelopes and discrete mode-graph reachability."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

from ..hp.ast import (
    Assign, Cmp, Const, Formula, Ode, Program, Sub, Term, Test, Var, Add, Mul,
    choice_branches, conj, conjuncts, ge, le, seq_items,
)
from ..hp.printer import pretty_print
from ..icp.interval import Box, interval_eval


class UnboundedDerivative(ValueError):
    """Interval evaluation of the field returned an infinite bound."""


@dataclass(frozen=True)
class ReachEnvelope:
    """Box holding every state reachable from ``init`` within [t_lo, t_hi]."""

    box: Box
    t_lo: float
    t_hi: float
    init: Box
    rates: dict = field(default_factory=dict, compare=False, hash=False)  # var -> (lo, hi)
    provenance: dict = field(default_factory=dict, compare=False, hash=False)

    def __post_init__(self):
        if not self.t_lo <= self.t_hi:
            raise ValueError("empty time window")

    def bounds(self, var: str) -> tuple[float, float]:
        iv = self.box.interval(var)
        return iv.lo, iv.hi

    def components(self, clock: Optional[str], t0: float = 0.0, skip=()) -> list[Term]:
        """Barrier terms (each <= 0 inside) of the clock-parametrized envelope.

        With a clock variable the bound on x at clock value c is
        init_x + rate_x * (c - t0) on either side; without one the static
        box is used.
        """
        out: list[Term] = []
        for x, a, b in zip(self.init.vars, self.init.lo, self.init.hi):
            if x == clock or x in skip:
                continue
            lo_r, hi_r = self.rates[x]
            if clock is None:
                lo, hi = self.bounds(x)
                out += [Sub(Const(lo), Var(x)), Sub(Var(x), Const(hi))]
                continue
            el = _elapsed(clock, t0)
            out.append(Sub(_affine(a, min(lo_r, 0.0), el), Var(x)))
            out.append(Sub(Var(x), _affine(b, max(hi_r, 0.0), el)))
        if clock is not None:
            out.append(Sub(Const(t0), Var(clock)))
        return out

    def formula(self, clock: Optional[str], t0: float = 0.0, skip=()) -> Formula:
        f = conj(*[le(c, Const(0.0)) for c in self.components(clock, t0, skip)])
        if clock is not None:
            f = conj(f, le(Var(clock), Const(t0 + self.t_hi)))
        return f

    def to_json(self) -> dict:
        return {
            "box": self.box.to_json(),
            "window": [self.t_lo, self.t_hi],
            "rates": {k: list(v) for k, v in sorted(self.rates.items())},
        }


def _elapsed(clock: str, t0: float) -> Term:
    return Var(clock) if t0 == 0.0 else Sub(Var(clock), Const(t0))


def _affine(c: float, rate: float, el: Term) -> Term:
    if rate == 0.0:
        return Const(c)
    return Add(Const(c), Mul(Const(rate), el))


def bounded_reach_envelope(
    ode: Ode,
    init: Box,
    time_bound: float,
    domain: Box,
    rates: Optional[dict] = None,
) -> ReachEnvelope:
    """Expand ``init`` by [T * min(lo, 0), T * max(hi, 0)] per variable.

    Rates come from ``rates`` when supplied, else from interval evaluation
    of the right-hand side over ``domain``.
    """
    if time_bound < 0:
        raise ValueError("time bound must be nonnegative")
    rates = dict(rates or {})
    lo, hi, prov = [], [], {}
    for x in init.vars:
        rhs = dict(ode.eqs).get(x)
        if x not in rates:
            if rhs is None:
                rates[x] = (0.0, 0.0)
            else:
                iv = interval_eval(rhs, domain)
                if not (math.isfinite(iv.lo) and math.isfinite(iv.hi)):
                    raise UnboundedDerivative(f"unbounded derivative for {x}: {pretty_print(rhs)}")
                rates[x] = (iv.lo, iv.hi)
                prov[x] = "interval"
        else:
            prov[x] = "supplied"
        r_lo, r_hi = rates[x]
        iv = init.interval(x)
        lo.append(iv.lo + time_bound * min(r_lo, 0.0))
        hi.append(iv.hi + time_bound * max(r_hi, 0.0))
    return ReachEnvelope(Box(init.vars, lo, hi), 0.0, float(time_bound), init, rates, prov)


def bounds_from(f: Formula, names: Iterable[str]) -> dict[str, tuple[float, float]]:
    """Single-variable bounds implied by top-level conjuncts of ``f``."""
    from .arith import _ground, _value
    out = {n: [-math.inf, math.inf] for n in names}
    for c in conjuncts(f):
        if not isinstance(c, Cmp):
            continue
        for a, b, op in ((c.left, c.right, c.op), (c.right, c.left, _flip(c.op))):
            if isinstance(a, Var) and a.name in out and _ground(b):
                v = _value(b)
                if v is None:
                    continue
                if op in ("<=", "<", "="):
                    out[a.name][1] = min(out[a.name][1], v)
                if op in (">=", ">", "="):
                    out[a.name][0] = max(out[a.name][0], v)
    return {k: (v[0], v[1]) for k, v in out.items()}


def _flip(op: str) -> str:
    return {"<=": ">=", "<": ">", ">=": "<=", ">": "<", "=": "="}.get(op, op)


# ------------------------------------------------------------ mode graphs


@dataclass(frozen=True)
class ModeGraph:
    modes: tuple
    edges: tuple  # (source, target, guard text)
    bad: frozenset = frozenset()

    def __post_init__(self):
        ms = set(self.modes)
        for a, b, _ in self.edges:
            if a not in ms or b not in ms:
                raise ValueError(f"edge {a} -> {b} leaves the declared modes")

    def successors(self, m) -> list:
        return sorted({b for a, b, _ in self.edges if a == m}, key=str)


def discrete_unreachable(g: ModeGraph, start: Iterable) -> set:
    """Modes not forward-reachable from ``start``, ignoring guards."""
    seen = set(start)
    todo = list(seen)
    while todo:
        m = todo.pop()
        for n in g.successors(m):
            if n not in seen:
                seen.add(n)
                todo.append(n)
    return set(g.modes) - seen


def _mode_test(p: Program, var: str):
    if isinstance(p, Test):
        for c in conjuncts(p.cond):
            if isinstance(c, Cmp) and c.op == "=" and c.left == Var(var) and isinstance(c.right, Const):
                return c.right.value
    return None


def mode_graph(body: Program, var: str, modes: dict[str, int], bad: Sequence[str] = ()) -> ModeGraph:
    """Edges from the choice branches of a loop body.

    A branch leaves from the mode of its leading mode test (every mode if
    there is none) and enters the mode of its last assignment to ``var``
    (its source if there is none).
    """
    names = {v: n for n, v in modes.items()}
    edges = set()
    for br in choice_branches(body):
        items = seq_items(br)
        src = None
        for it in items:
            if not isinstance(it, Test):
                break
            src = _mode_test(it, var) if src is None else src
        tgt = None
        for it in items:
            if isinstance(it, Assign) and it.var == var and isinstance(it.term, Const):
                tgt = it.term.value
        guard = pretty_print(br)
        sources = [names[src]] if src in names else list(modes)
        for s in sources:
            t = names.get(tgt, s) if tgt is not None else s
            edges.add((s, t, guard))
    return ModeGraph(tuple(modes), tuple(sorted(edges)), frozenset(bad))
