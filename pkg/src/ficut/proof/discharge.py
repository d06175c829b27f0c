"""Automated discharge of proof goals.

The pipeline, per goal ``assume -> [program] post``:

* choice: one premise per branch; a branch whose leading tests contradict
  the assumptions is excised (the icp verdict is kept on the node);
* tests are absorbed into the assumptions;
* assignments, havocs and tests followed by no flow or loop are handled by
  weakest preconditions, havoc by a fresh variable;
* an assignment block in front of a flow maps the assumptions forward
  (exactly for invertible linear blocks, otherwise touched conjuncts are
  dropped);
* a single flow is closed by the barrier rule with attached certificates,
  re-levelled quadratic certificates or sublevel atoms of the goal itself;
* modality-free goals go to the arithmetic checker.

Anything else stays open with a reason.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..certsynth.certificates import NoCertificate, QuadraticCertificate
from ..certsynth.levels import LEVEL_GRID, ellipsoid_image, select_level, sublevel_contained
from ..hp.ast import (
    FALSE, TRUE, And, Assign, Choice, Cmp, Const, Formula, Havoc, Implies, Not, Ode, Or,
    Program, Seq, Star, Sub, Term, Test, Var, choice_branches, conj, conjuncts, formula_vars,
    has_modality, has_ode, has_quantifier, has_star, le, seq, seq_items, subst_formula,
    subst_term, term_lvars, term_vars,
)
from ..hp.printer import pretty_print
from ..icp.interval import Box
from ..icp.solver import DEFAULT_DELTA, DEFAULT_EPS
from .. import poly
from .arith import (
    DELTA_SAT, UNSAT, ArithChecker, Verdict, exact_counterexample, ground_equalities, simplify,
    substitute_values,
)
from .goals import CLOSED, FAILED, Goal, ProofNode
from .rules import barrier_premises

DEFAULT_BUDGET = 100_000


@dataclass
class Attachment:
    """A certificate attached to the proof, usable by the barrier rule."""

    name: str
    kind: str  # quadratic | barrier | envelope
    components: tuple  # barrier terms, each <= 0 inside
    ode: Optional[Ode] = None
    check: str = "weak"
    eps: float = DEFAULT_EPS
    cert: object = None
    value: Optional[Term] = None  # V for re-levelling
    formula: Formula = TRUE

    def vars(self) -> set[str]:
        out: set[str] = set()
        for c in self.components:
            out |= term_vars(c)
        return out


def _leading_tests(p: Program) -> list[Formula]:
    out = []
    for it in seq_items(p):
        if not isinstance(it, Test):
            break
        out.append(it.cond)
    return out


def _barrier_atom(c: Formula) -> Optional[Term]:
    """``a <= b`` (or ``<``, ``>=``, ``>``) as the term that is <= 0 inside."""
    if not isinstance(c, Cmp):
        return None
    if c.op in ("<=", "<"):
        return c.left if c.right == Const(0.0) else Sub(c.left, c.right)
    if c.op in (">=", ">"):
        return c.right if c.left == Const(0.0) else Sub(c.right, c.left)
    return None


def _consequent(f: Formula) -> Formula:
    while isinstance(f, Implies):
        f = f.right
    return f


def quadratic_of(f: Formula, names) -> Optional[QuadraticCertificate]:
    """Recognize ``q(x) <= c`` with q a positive definite quadratic form."""
    if not isinstance(f, Cmp) or f.op not in ("<=", "<"):
        return None
    p = poly.to_poly(Sub(f.left, f.right))
    if p is None or poly.variables(p) and {v.name for v in poly.variables(p)} - set(names):
        return None
    c = -float(p.get((), 0))
    if any(poly.mono_degree(m) not in (0, 2) for m in p):
        return None
    if any(term_lvars(t) for t in (f.left, f.right)):
        return None
    H = poly.quadratic_matrix(p, list(names))
    try:
        return QuadraticCertificate(tuple(tuple(float(v) for v in r) for r in H), tuple(names), c)
    except (NoCertificate, ValueError):
        return None


class ProofContext:
    """Shared state of one proof run."""

    def __init__(self, model, delta: float = DEFAULT_DELTA, eps: float = DEFAULT_EPS,
                 max_boxes: Optional[int] = None, budget: int = DEFAULT_BUDGET):
        self.model = model
        self.symbols = model.symbols
        self.delta = delta
        self.eps = eps
        self.max_boxes = max_boxes
        self.budget = budget
        self.steps = 0
        self.fresh = 0
        self.log: list[str] = []
        self.attachments: list[Attachment] = []
        self.envelopes: dict = {}
        self.lvars = set(self.symbols.logical_vars)
        domain = dict(self.symbols.domain)
        modes = {}
        for var, table in self.symbols.modes.items():
            vals = set(table.values())
            if mode_closed(model, var, vals):
                modes[var] = vals
            else:
                self.log.append(f"mode variable {var} is not closed under the model; no case split")
                domain.setdefault(var, (float(min(vals)), float(max(vals))))
        self.checker = ArithChecker(domain, modes, delta, max_boxes)

    # ------------------------------------------------------------ helpers

    def note(self, node: ProofNode, text: str):
        node.notes.append(text)
        self.log.append(text)

    def fresh_var(self, x: str) -> str:
        self.fresh += 1
        name = f"{x}#{self.fresh}"
        rng = self.checker.domain.get(x)
        if rng is not None:
            self.checker.add_variable(name, rng)
        return name

    def attach(self, att: Attachment):
        self.attachments.append(att)

    # ------------------------------------------------------------- driver

    def discharge(self, node: ProofNode) -> str:
        if node.status == CLOSED:
            return node.status
        if node.children:
            for c in node.children:
                self.discharge(c)
            return node.update()
        self.steps += 1
        if self.steps > self.budget:
            node.leave_open("budget exhausted")
            return node.status
        g = node.goal
        if g.program is None:
            self.arith_leaf(node)
            return node.status
        self.expand_program(node)
        return node.update()

    # ------------------------------------------------------- arithmetic

    def arith_leaf(self, node: ProofNode, rule: str = "arith"):
        g = node.goal
        if has_modality(g.post) or has_quantifier(g.post) or has_modality(g.assume):
            node.leave_open("modal or quantified formula outside the arithmetic fragment")
            return
        vals = ground_equalities(g.assume)
        post = substitute_values(g.post, vals)
        assume = substitute_values(g.assume, vals)
        if post == TRUE or assume == FALSE or set(conjuncts(post)) <= set(conjuncts(assume)) | {TRUE}:
            node.rule = node.rule or "propositional"
            node.close("propositional")
            return
        v = self.checker.valid(g.assume, g.post)
        node.rule = node.rule or rule
        self._apply_verdict(node, v, conj(g.assume, Not(g.post)))

    def _apply_verdict(self, node: ProofNode, v: Verdict, negation: Formula):
        if v.unsat:
            node.close("icp", **{"icp": "unsat", **v.stats})
            return
        node.stats.update(v.stats)
        if v.status == DELTA_SAT:
            node.stats["icp"] = "delta-sat"
            if exact_counterexample(negation, v.witness, self.lvars):
                node.fail("counterexample: the witness midpoint violates the goal", v.witness)
            else:
                node.leave_open("delta-sat: not proven", v.witness)
        elif v.status == "budget":
            node.leave_open("icp box budget exhausted")
        else:
            node.leave_open(v.detail or "arithmetic check failed")

    # --------------------------------------------------------- programs

    def expand_program(self, node: ProofNode):
        g = node.goal
        items = seq_items(g.program)
        first, rest = items[0], items[1:]
        restprog = seq(*rest) if rest else None
        if isinstance(first, Star):
            if rest:
                node.leave_open("loop inside a sequence")
                return
            v = self.checker.satisfiable(g.assume)
            if v.unsat:
                node.rule = "empty-antecedent"
                node.close("empty-antecedent", **v.stats)
                self.log.append(f"empty antecedent: {pretty_print(g.assume)}")
            else:
                node.leave_open("loop needs a cut or an invariant", v.witness)
            return
        if isinstance(first, Choice):
            branches = choice_branches(first)
            goals = [Goal(g.assume, seq(b, *rest), g.post) for b in branches]
            kids = node.expand("choice", goals)
            for kid, b in zip(kids, branches):
                tests = _leading_tests(b)
                if tests:
                    v = self.checker.satisfiable(conj(g.assume, *tests))
                    if v.unsat:
                        kid.rule = "excise"
                        kid.close("excise", "leading test contradicts the assumptions", icp="unsat", **v.stats)
                        self.log.append(f"excised branch {pretty_print(b)[:60]}: icp unsat")
                        continue
                self.discharge(kid)
            return
        if isinstance(first, Test):
            assume = conj(g.assume, first.cond)
            v = self.checker.satisfiable(assume)
            if v.unsat:
                node.rule = "excise"
                node.close("excise", "test contradicts the assumptions", icp="unsat", **v.stats)
                return
            (kid,) = node.expand("test", [Goal(assume, restprog, g.post)])
            self.discharge(kid)
            return
        if isinstance(first, (Assign, Havoc)):
            if restprog is None or not (has_ode(restprog) or has_star(restprog)):
                post = simplify(self.wp(g.program, g.post))
                (kid,) = node.expand("wp", [Goal(g.assume, None, post)])
                self.discharge(kid)
                return
            k = 0
            while k < len(items) and isinstance(items[k], (Assign, Havoc)):
                k += 1
            assume, notes = self.forward_image(g.assume, items[:k])
            (kid,) = node.expand("assign-image", [Goal(assume, seq(*items[k:]), g.post)])
            for n in notes:
                self.note(kid, n)
            self.discharge(kid)
            return
        if isinstance(first, Ode):
            if restprog is not None:
                if has_ode(restprog) or has_star(restprog):
                    node.leave_open("flow followed by another flow or loop")
                    return
                post = simplify(self.wp(restprog, g.post))
                (kid,) = node.expand("wp-after-flow", [Goal(g.assume, first, post)])
                self.discharge(kid)
                return
            self.flow(node)
            return
        node.leave_open(f"unsupported program {type(first).__name__}")

    def wp(self, p: Program, post: Formula) -> Formula:
        if isinstance(p, Assign):
            return subst_formula(post, {p.var: p.term})
        if isinstance(p, Havoc):
            return subst_formula(post, {p.var: Var(self.fresh_var(p.var))})
        if isinstance(p, Test):
            return Implies(p.cond, post)
        if isinstance(p, Seq):
            return self.wp(p.left, self.wp(p.right, post))
        if isinstance(p, Choice):
            return And(self.wp(p.left, post), self.wp(p.right, post))
        raise ValueError(f"no weakest precondition for {type(p).__name__}")

    def forward_image(self, assume: Formula, block) -> tuple[Formula, list[str]]:
        """Strongest facts about the state after ``block`` that we can state."""
        env: dict[str, Optional[Term]] = {}
        for a in block:
            if isinstance(a, Assign):
                env[a.var] = subst_term(a.term, {k: v for k, v in env.items() if v is not None})
                if any(env.get(x, 0) is None for x in term_vars(a.term)):
                    env[a.var] = None
            else:
                env[a.var] = None
        written = set(env)
        out, notes = [], []
        for c in conjuncts(assume):
            touched = formula_vars(c) & written
            if not touched:
                out.append(c)
                continue
            img = self._linear_image(c, sorted(touched), env)
            if img is None:
                notes.append(f"dropped {pretty_print(c)} (no invertible linear image)")
            else:
                out.append(img[0])
                notes.append(img[1])
        for x, t in sorted(env.items()):
            if t is not None and not (term_vars(t) & written):
                out.append(Cmp("=", Var(x), t))
        return conj(*out), notes

    def _linear_image(self, c: Formula, names: list[str], env):
        R = np.zeros((len(names), len(names)))
        for i, u in enumerate(names):
            t = env.get(u)
            if t is None:
                return None
            p = poly.to_poly(t)
            if p is None or poly.degree(p) > 1 or () in p:
                return None
            for m, coef in p.items():
                (node, _), = m
                if not isinstance(node, Var) or node.name not in names:
                    return None
                R[i, names.index(node.name)] = float(coef)
        if abs(np.linalg.det(R)) <= 1e-12:
            return None
        q = quadratic_of(c, names)
        if q is not None:
            img = ellipsoid_image(q, q.level, R, names)
            return img.sublevel_formula(), f"ellipsoid image of {pretty_print(c)}"
        Ri = np.linalg.inv(R)
        sigma = {}
        for i, u in enumerate(names):
            parts = [_scaled(Ri[i, j], Var(w)) for j, w in enumerate(names) if Ri[i, j] != 0.0]
            acc = parts[0]
            for t in parts[1:]:
                acc = _add(acc, t)
            sigma[u] = acc
        return subst_formula(c, sigma), f"linear image of {pretty_print(c)}"

    # ------------------------------------------------------------- flows

    def flow(self, node: ProofNode):
        g = node.goal
        ode: Ode = g.program
        xs = {x for x, _ in ode.eqs}
        frame = conj(*[c for c in conjuncts(g.assume) if not (formula_vars(c) & xs)])
        attempts: list[ProofNode] = []

        if not (formula_vars(g.post) & xs):
            tmp = ProofNode(g)
            (kid,) = tmp.expand("frame", [Goal(g.assume, None, g.post)])
            self.arith_leaf(kid)
            if tmp.update() == CLOSED:
                self._adopt(node, tmp)
                return
            attempts.append(tmp)

        linked = [a for a in self.attachments if a.ode == ode]
        others = [a for a in self.attachments if a.ode != ode and a.vars() & xs and a.vars() <= xs]
        tried = set()

        def candidates():
            for a in linked:
                yield a.name, a.components, a.check, a.eps
            for a in linked:
                if a.value is not None:
                    yield ("relevel", a)
            for c in conjuncts(g.assume):
                b = _barrier_atom(c)
                if b is not None and term_vars(b) & xs:
                    yield "assumption", (b,), "weak", self.eps
            for c in conjuncts(_consequent(g.post)):
                b = _barrier_atom(c)
                if b is not None and term_vars(b) & xs:
                    yield "postcondition", (b,), "weak", self.eps
            for a in others:
                yield a.name, a.components, a.check, a.eps

        for cand in candidates():
            if cand[0] == "relevel":
                tmp = self._relevel(g, cand[1], frame)
                if tmp is None:
                    continue
            else:
                name, comps, check, eps = cand
                key = (tuple(pretty_print(c) for c in comps), check)
                if key in tried:
                    continue
                tried.add(key)
                tmp = self._barrier_attempt(g, comps, frame, check, eps, name)
            if tmp.update() == CLOSED:
                self._adopt(node, tmp)
                for a in attempts:
                    node.notes.append(f"tried {a.args.get('certificate', a.rule)}: {_blocker(a)}")
                return
            attempts.append(tmp)
        if not attempts:
            node.leave_open("no certificate for this flow")
            return
        best = max(attempts, key=lambda a: sum(c.closed for c in a.children))
        self._adopt(node, best)
        for a in attempts:
            if a is not best:
                node.notes.append(f"tried {a.args.get('certificate', a.rule)}: {_blocker(a)}")
        node.update()

    def _adopt(self, node: ProofNode, tmp: ProofNode):
        node.rule, node.args, node.children = tmp.rule, tmp.args, tmp.children
        node.notes.extend(tmp.notes)
        node.status, node.reason = tmp.status, tmp.reason

    def _barrier_attempt(self, g: Goal, comps, frame, check, eps, name,
                         init_leaf=None, safe_leaf=None, **args) -> ProofNode:
        tmp = ProofNode(g)
        goals = barrier_premises(g, list(comps), frame, check, eps)
        kids = tmp.expand("barrier", goals, certificate=name, check=check, eps=eps,
                          barrier=[pretty_print(c) for c in comps], **args)
        init, safe, dec = kids[0], kids[-1], kids[1:-1]
        for k, special in ((init, init_leaf), (safe, safe_leaf)):
            if special is not None and special(k):
                continue
            self.arith_leaf(k)
            if not k.closed:
                break
        else:
            for k in dec:
                self.arith_leaf(k, rule=f"decrease-{check}")
                if not k.closed:
                    break
        for k in kids:
            if k.rule is None and not k.closed:
                k.leave_open("not attempted: an earlier premise stayed open")
            elif k.status == FAILED:
                # a refuted premise sinks this certificate, not the flow goal
                k.leave_open(f"certificate premise refuted ({k.reason})")
        if all(k.closed for k in dec):
            self.log.append(f"{name}: {check} decrease check closed")
        return tmp

    def _relevel(self, g: Goal, att: Attachment, frame: Formula) -> Optional[ProofNode]:
        """Pick a fresh level of V between the assumptions and the postcondition."""
        ode: Ode = g.program
        xs = [x for x, _ in ode.eqs]
        vals = ground_equalities(frame)
        contain = conj(*[c for c in conjuncts(g.assume) if formula_vars(c) and formula_vars(c) <= set(xs)])
        exclude = substitute_values(conj(ode.domain, frame, Not(g.post)), vals)
        exclude = simplify(exclude)
        if contain == TRUE or formula_vars(exclude) - set(xs) - set(vals):
            return None
        names = sorted(set(xs) | formula_vars(contain) | formula_vars(exclude))
        try:
            box = Box(tuple(names), [self.checker.domain[n][0] for n in names],
                      [self.checker.domain[n][1] for n in names])
        except KeyError:
            return None
        res = select_level(att.value, contain, exclude, box, self.delta, self.max_boxes)
        if not res.ok:
            return None
        l_hi = (res.upper - res.lower)
        step = LEVEL_GRID * max(abs(res.upper), 1e-300)
        level = res.lower + round(0.5 * l_hi / step) * step if step > 0 else res.lower
        level = min(max(level, res.lower), res.upper)
        B = Sub(att.value, Const(level))
        star = att.cert.with_level(level) if isinstance(att.cert, QuadraticCertificate) else None

        def init_leaf(k: ProofNode) -> bool:
            inner = quadratic_of(contain, xs) if len(conjuncts(contain)) == 1 else None
            if star is None or inner is None or tuple(inner.vars) != tuple(star.vars):
                return False
            r = sublevel_contained(inner, star, box.project(xs), self.delta, self.max_boxes)
            k.rule = "sublevel-contained"
            if r.contained:
                k.close("sublevel-contained", **r.stats)
            else:
                k.leave_open("containment not proven", r.witness)
            return True

        def safe_leaf(k: ProofNode) -> bool:
            post = substitute_values(g.post, vals)
            outer = quadratic_of(post, xs)
            if star is None or outer is None:
                return False
            r = sublevel_contained(star, outer, box.project(xs), self.delta, self.max_boxes)
            k.rule = "sublevel-contained"
            if r.contained:
                k.close("sublevel-contained", **r.stats)
            else:
                k.leave_open("containment not proven", r.witness)
            return True

        tmp = self._barrier_attempt(g, (B,), frame, "weak", att.eps, f"{att.name}@{level:.6g}",
                                    init_leaf, safe_leaf, level=level,
                                    level_window=[res.lower, res.upper])
        self.log.append(f"{att.name}: level {level:.6g} chosen from [{res.lower:.6g}, {res.upper:.6g}]")
        return tmp


def _blocker(a: ProofNode) -> str:
    for leaf in a.leaves():
        if not leaf.closed:
            return leaf.reason or "open"
    return "closed"


def _scaled(c: float, t: Term) -> Term:
    from ..hp.ast import Mul
    return Mul(Const(c), t)


def _add(a: Term, b: Term) -> Term:
    from ..hp.ast import Add
    return Add(a, b)


def mode_closed(model, var: str, values: set) -> bool:
    """Every write to ``var`` stores a declared mode value."""
    from ..hp.ast import Box as BoxF, Diamond, iter_term  # noqa: F401

    def prog_ok(p) -> bool:
        if isinstance(p, Assign):
            return p.var != var or (isinstance(p.term, Const) and p.term.value in values)
        if isinstance(p, Havoc):
            return p.var != var
        if isinstance(p, Ode):
            return all(x != var for x, _ in p.eqs)
        if isinstance(p, (Seq, Choice)):
            return prog_ok(p.left) and prog_ok(p.right)
        if isinstance(p, Star):
            return prog_ok(p.body)
        return True

    def form_ok(f) -> bool:
        if isinstance(f, (BoxF, Diamond)):
            return prog_ok(f.program) and form_ok(f.post)
        if isinstance(f, (And, Or, Implies)):
            return form_ok(f.left) and form_ok(f.right)
        if isinstance(f, Not):
            return form_ok(f.arg)
        return True

    return all(prog_ok(p) for p in model.programs.values()) and all(
        form_ok(f) for f in model.formulas.values())
