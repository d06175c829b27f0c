"""Tactic files: parse directives and run them against a model.

One directive per line, ``#`` starts a comment::

    goal <formula>
    cut <formula>[+<formula>...]
    loop-inv <formula>[+<formula>...]
    barrier <certificate-file> [check=strict|weak] [eps=<v>] [mode=<m>] [guard=<formula>]
    lyap-linear mode=<m> [Q=identity] level=<v> [guard=<formula>]
    synth-barrier mode=<m> degree=<d> [seed=<n>] [contain=<f>] [exclude=<f>]
                  [guard=<f>] [check=strict|weak] [core=<r>]
    bounded-reach mode=<m> time=<v> [clock=<var>]
    discrete-cert start=<m,...> [bad=<m,...>]
    auto [budget=<n>]

Certificates register formulas ``cert:<mode>`` and envelopes register
``reach:<mode>``; both can be named by ``cut`` and ``loop-inv``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .. import poly
from ..certsynth.certificates import BarrierCertificate, monomial_basis, read_certificate
from ..certsynth.levels import select_level
from ..certsynth.lyapunov import solve_lyapunov_linear
from ..certsynth.refine import refine_loop
from ..hp.ast import (
    TRUE, Box as BoxF, Cmp, Const, Formula, Implies, LVar, Mul, Not, Ode, Star, Sub, Var, conj,
    formula_vars, le, program_odes, subst_formula, subst_term, term_lvars, term_vars,
)
from ..hp.evaluate import DomainError
from ..hp.parser import Model, parse_model
from ..hp.printer import pretty_print
from ..icp.interval import Box
from ..icp.kernel import BACKEND
from ..icp.solver import DEFAULT_DELTA, DEFAULT_EPS
from ..sim import SimConfig, integrate_ode
from .arith import ground_equalities, simplify
from .discharge import DEFAULT_BUDGET, Attachment, ProofContext
from .goals import Goal, ProofNode
from .reach import bounded_reach_envelope, bounds_from, discrete_unreachable, mode_graph
from .rules import ShapeError, apply_fwd_inv_cut, apply_invariant_rule


class TacticError(ValueError):
    """A directive is malformed or cannot be applied."""

    def __init__(self, msg: str, line: int = 0):
        self.line = line
        super().__init__(f"tactic line {line}: {msg}" if line else msg)


class NonlinearMode(TacticError):
    pass


@dataclass(frozen=True)
class Directive:
    name: str
    args: tuple
    opts: tuple
    line: int
    text: str

    def opt(self, key: str, default=None):
        return dict(self.opts).get(key, default)


KNOWN = {"goal", "cut", "loop-inv", "barrier", "lyap-linear", "synth-barrier",
         "bounded-reach", "discrete-cert", "auto"}


def parse_tactics(text: str) -> list[Directive]:
    out = []
    for no, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        name, *rest = line.split()
        if name not in KNOWN:
            raise TacticError(f"unknown directive {name!r}", no)
        args, opts = [], []
        for tok in rest:
            if "=" in tok:
                k, _, v = tok.partition("=")
                opts.append((k, v))
            else:
                args.append(tok)
        out.append(Directive(name, tuple(args), tuple(opts), no, line))
    return out


# ------------------------------------------------------------- mode helpers


def mode_ode(model: Model, mode: str) -> Ode:
    if mode not in model.programs:
        raise TacticError(f"unknown program {mode!r}; available: {', '.join(sorted(model.programs))}")
    odes = program_odes(model.programs[mode])
    if len(odes) != 1:
        raise TacticError(f"program {mode!r} has {len(odes)} flows, expected one")
    return odes[0]


def linear_matrix(ode: Ode) -> tuple[np.ndarray, tuple[str, ...]]:
    """A with x' = A x, or NonlinearMode when the field is not linear."""
    names = tuple(x for x, _ in ode.eqs)
    A = np.zeros((len(names), len(names)))
    for i, (x, rhs) in enumerate(ode.eqs):
        p = poly.to_poly(rhs)
        if p is None or poly.degree(p) > 1:
            raise NonlinearMode(f"field of {x} is not linear: {pretty_print(rhs)}")
        for m, c in p.items():
            if m == ():
                raise NonlinearMode(f"field of {x} has a constant offset")
            (node, _), = m
            if not isinstance(node, Var) or node.name not in names:
                raise NonlinearMode(f"field of {x} depends on {node.name}")
            A[i, names.index(node.name)] = float(c)
    return A, names


def lyap_for_mode(model: Model, mode: str, Q=None, level=None, guard=None):
    ode = mode_ode(model, mode)
    A, names = linear_matrix(ode)
    cert = solve_lyapunov_linear(A, Q, names, guard, provenance={"mode": mode})
    return cert.with_level(level) if level is not None else cert


def synthesis_box(model: Model, ode: Ode, names) -> Box:
    """Evolution-domain bounds intersected with the declared domain."""
    b = bounds_from(ode.domain, names)
    lo, hi = [], []
    for n in names:
        d = model.domain.get(n, (-math.inf, math.inf))
        a, c = max(b[n][0], d[0]), min(b[n][1], d[1])
        if not (math.isfinite(a) and math.isfinite(c)):
            raise TacticError(f"no bounded synthesis domain for {n}")
        lo.append(a)
        hi.append(c)
    return Box(tuple(names), lo, hi)


def synthesize_barrier(model: Model, mode: str, degree: int = 2, seed: int = 0,
                       delta: float = DEFAULT_DELTA, traces: int = 12, t_max: float = 2.0,
                       h: float = 1e-3, core: float = 0.25, max_boxes=None):
    """Simulate the mode, fit an LP candidate and refine it against icp.

    The search runs in coordinates y = x / s with s the per-variable
    radius of the synthesis box, so that delta and ``core`` are relative
    to the box.  The returned certificate is expressed in x.
    """
    ode = mode_ode(model, mode)
    names = tuple(x for x, _ in ode.eqs)
    box = synthesis_box(model, ode, names)
    scale = {n: max(abs(a), abs(b)) for n, a, b in zip(box.vars, box.lo, box.hi)}
    to_x = {n: Mul(Const(scale[n]), Var(n)) for n in names}
    field_y = tuple((x, Mul(Const(1.0 / scale[x]), subst_term(t, to_x))) for x, t in ode.eqs)
    H_y = subst_formula(ode.domain, to_x)
    box_y = Box(names, [a / scale[n] for n, a in zip(names, box.lo)],
                [b / scale[n] for n, b in zip(names, box.hi)])
    rng = np.random.default_rng(seed)
    cfg = SimConfig(h=h, t_max=t_max, seed=seed)
    runs = []
    for _ in range(traces):
        y0 = {n: float(rng.uniform(a, b)) for n, a, b in zip(names, box_y.lo, box_y.hi)}
        try:
            runs.append(integrate_ode(field_y, y0, H_y, cfg))
        except (ValueError, DomainError):  # a bad start only drops that trace
            continue
    if not runs:
        raise TacticError(f"no simulation of {mode} succeeded")
    basis = monomial_basis(len(names), degree)
    res = refine_loop(runs, basis, field_y, box_y, delta, names, seed, core_radius=core,
                      max_boxes=max_boxes)
    if res.certificate is not None:
        c = res.certificate
        coeffs = [k / math.prod(scale[n] ** e for n, e in zip(c.vars, m))
                  for k, m in zip(c.coeffs, c.basis)]
        res.certificate = BarrierCertificate(c.vars, c.basis, coeffs, c.level, box, c.eps, c.guard,
                                             c.verified, provenance={**c.provenance, "mode": mode, "scale": scale})
    return res, box, ode


# ------------------------------------------------------------------ runner


@dataclass
class ProofResult:
    root: ProofNode
    ctx: ProofContext
    report: dict = field(default_factory=dict)

    @property
    def closed(self) -> bool:
        return self.root.closed


def _strict_to_nonstrict(f: Formula) -> Formula:
    from ..hp.ast import And, Not as N, Or
    if isinstance(f, Cmp) and f.op in ("<", ">"):
        return Cmp("<=" if f.op == "<" else ">=", f.left, f.right)
    if isinstance(f, (And, Or, Implies)):
        return type(f)(_strict_to_nonstrict(f.left), _strict_to_nonstrict(f.right))
    if isinstance(f, N):
        return N(_strict_to_nonstrict(f.arg))
    return f


class TacticRunner:
    def __init__(self, model: Model, delta: float = DEFAULT_DELTA, eps: float = DEFAULT_EPS,
                 max_boxes=None, base_dir: Optional[Path] = None, budget: int = DEFAULT_BUDGET):
        self.model = model
        self.ctx = ProofContext(model, delta, eps, max_boxes, budget)
        self.base = Path(base_dir) if base_dir else Path.cwd()
        self.formulas = dict(model.formulas)
        self.certificates: list[dict] = []
        self.goal_name: Optional[str] = None
        self.root: Optional[ProofNode] = None
        self.focus: Optional[ProofNode] = None
        self.applied: list[str] = []

    # ---------------------------------------------------------- formulas

    def formula(self, spec: str, line: int = 0) -> Formula:
        parts = []
        for name in spec.split("+"):
            if name not in self.formulas:
                raise TacticError(f"unknown formula {name!r}", line)
            parts.append(self.formulas[name])
        return conj(*parts)

    def _default_goal(self) -> str:
        for name in reversed(self.model.order):
            f = self.model.formulas.get(name)
            g = Goal.of(f) if f is not None else None
            if g is not None and isinstance(g.program, Star):
                return name
        raise TacticError("the model has no formula of shape I -> [a*]S")

    def _ensure_root(self):
        if self.root is None:
            self.set_goal(self._default_goal())

    def set_goal(self, name: str, line: int = 0):
        if name not in self.model.formulas:
            raise TacticError(f"unknown goal {name!r}", line)
        self.goal_name = name
        self.root = ProofNode(Goal.of(self.model.formulas[name]))
        self.focus = self.root
        vals = ground_equalities(self.root.goal.assume)
        for var in list(self.ctx.checker.modes):
            if vals.get(var) not in self.ctx.checker.modes[var]:
                values = self.ctx.checker.modes.pop(var)
                self.ctx.checker.domain.setdefault(var, (float(min(values)), float(max(values))))
                self.ctx.log.append(f"initial states do not fix {var}; no mode case split")

    # -------------------------------------------------------------- run

    def run(self, directives: list[Directive]) -> ProofResult:
        for d in directives:
            getattr(self, "do_" + d.name.replace("-", "_"))(d)
            self.applied.append(d.text)
        self._ensure_root()
        self.root.update()
        return ProofResult(self.root, self.ctx, self.report())

    def do_goal(self, d: Directive):
        if len(d.args) != 1:
            raise TacticError("goal takes one formula name", d.line)
        self.set_goal(d.args[0], d.line)

    def _apply_rule(self, d: Directive, rule: str):
        self._ensure_root()
        if len(d.args) != 1:
            raise TacticError(f"{d.name} takes one formula name", d.line)
        if self.focus is None:
            raise TacticError(f"no loop goal left for {d.name}", d.line)
        C = self.formula(d.args[0], d.line)
        C2 = _strict_to_nonstrict(C)
        node = self.focus
        if C2 != C:
            self.ctx.note(node, f"cut set {d.args[0]} made non-strict for the delta-decision checks")
        try:
            goals = (apply_fwd_inv_cut if rule == "fwd-inv-cut" else apply_invariant_rule)(node.goal, C2)
        except ShapeError as e:
            raise TacticError(str(e), d.line) from None
        kids = node.expand(rule, goals, formula=d.args[0])
        self.focus = kids[0] if rule == "fwd-inv-cut" else None

    def do_cut(self, d: Directive):
        self._apply_rule(d, "fwd-inv-cut")

    def do_loop_inv(self, d: Directive):
        self._apply_rule(d, "invariant")

    def _guard(self, d: Directive) -> Optional[Formula]:
        g = d.opt("guard")
        return self.formula(g, d.line) if g else None

    def _register(self, name: str, att: Attachment, summary: dict):
        self.ctx.attach(att)
        self.formulas[name] = att.formula
        self.certificates.append({"name": name, **summary})

    def do_lyap_linear(self, d: Directive):
        mode = d.opt("mode")
        if mode is None or d.opt("level") is None:
            raise TacticError("lyap-linear needs mode= and level=", d.line)
        if d.opt("Q", "identity") != "identity":
            raise TacticError("only Q=identity is supported in tactic files", d.line)
        level = float(d.opt("level"))
        try:
            cert = lyap_for_mode(self.model, mode, level=level, guard=self._guard(d))
        except NonlinearMode as e:
            raise TacticError(str(e), d.line) from None
        V = cert.value_term()
        att = Attachment(f"cert:{mode}", "quadratic", (Sub(V, Const(level)),), mode_ode(self.model, mode),
                         "weak", float(d.opt("eps", self.ctx.eps)), cert, V, cert.formula())
        self._register(f"cert:{mode}", att, {"kind": "quadratic", "mode": mode, "level": level,
                                             "P": [list(r) for r in cert.P],
                                             "residual": cert.provenance.get("residual")})

    def do_barrier(self, d: Directive):
        if len(d.args) != 1:
            raise TacticError("barrier takes one certificate file", d.line)
        path = (self.base / d.args[0]).resolve()
        try:
            cert = read_certificate(path, self.model.symbols)
        except (OSError, ValueError) as e:
            raise TacticError(f"cannot read certificate: {e}", d.line) from None
        mode = d.opt("mode") or cert.provenance.get("mode")
        ode = mode_ode(self.model, mode) if mode and mode != "none" else None
        check = d.opt("check", "weak")
        eps = float(d.opt("eps", self.ctx.eps))
        guard = self._guard(d) if d.opt("guard") else cert.guard
        if isinstance(cert, BarrierCertificate):
            B, V = cert.barrier_term(), cert.value_term()
            f = conj(guard, le(V, Const(cert.level))) if guard is not None else le(V, Const(cert.level))
            kind = "barrier"
        else:
            V = cert.value_term()
            B = Sub(V, Const(cert.level))
            f = conj(guard, cert.sublevel_formula()) if guard is not None else cert.sublevel_formula()
            kind = "quadratic"
        name = f"cert:{mode}" if mode and mode != "none" else f"cert:{Path(d.args[0]).stem}"
        att = Attachment(name, kind, (B,), ode, check, eps, cert, V, f)
        self._register(name, att, {"kind": kind, "file": d.args[0], "check": check, "eps": eps,
                                   "level": cert.level})

    def do_synth_barrier(self, d: Directive):
        mode = d.opt("mode")
        if mode is None:
            raise TacticError("synth-barrier needs mode=", d.line)
        degree = int(d.opt("degree", 2))
        seed = int(d.opt("seed", 0))
        res, box, ode = synthesize_barrier(self.model, mode, degree, seed, self.ctx.delta,
                                           core=float(d.opt("core", 0.25)),
                                           max_boxes=self.ctx.max_boxes)
        summary = {"kind": "barrier", "mode": mode, "degree": degree, "seed": seed,
                   "refine": res.status, "iterations": res.iterations, "refine_log": res.log}
        if res.certificate is None:
            self.certificates.append({"name": f"cert:{mode}", **summary, "witness": res.last_witness})
            self.ctx.log.append(f"synth-barrier {mode}: {res.status}")
            return
        V = res.certificate.value_term()
        names = list(box.vars)
        contain = self.formula(d.opt("contain"), d.line) if d.opt("contain") else None
        exclude = self.formula(d.opt("exclude"), d.line) if d.opt("exclude") else Not(ode.domain)
        used = set(names)
        for f in (contain, exclude):
            if f is not None:
                used |= formula_vars(f) | _lvars(f)
        used = sorted(used)
        dom = self.ctx.checker.domain
        missing = [n for n in used if n not in dom]
        if missing:
            raise TacticError(f"no domain for {missing}", d.line)
        lbox = Box(tuple(used), [dom[n][0] for n in used], [dom[n][1] for n in used])
        lv = select_level(V, contain, exclude, lbox, self.ctx.delta, self.ctx.max_boxes)
        summary.update({"coeffs": list(res.certificate.coeffs),
                        "basis": [list(m) for m in res.certificate.basis], "vars": names})
        if lv.ok:
            level = 0.5 * (lv.lower + lv.upper)
        elif lv.lower is not None and lv.lower > 0:
            # the sublevel set still contains the required states; the
            # proof obligations that need the exclusion stay unproven
            level = lv.lower
            summary["level_witnesses"] = lv.witnesses
            self.ctx.log.append(f"synth-barrier {mode}: exclusion not established at level {level:.6g}")
        else:
            summary.update({"level": None, "level_witnesses": lv.witnesses})
            self.certificates.append({"name": f"cert:{mode}", **summary})
            self.ctx.log.append(f"synth-barrier {mode}: no containing level")
            return
        scaled = BarrierCertificate(res.certificate.vars, res.certificate.basis,
                                    tuple(c / level for c in res.certificate.coeffs), 1.0,
                                    box, self.ctx.eps, self._guard(d), res.ok,
                                    provenance={"mode": mode, "seed": seed, "delta": self.ctx.delta})
        B = scaled.barrier_term()
        guard = scaled.guard
        f = conj(guard, le(B, Const(0.0))) if guard is not None else le(B, Const(0.0))
        check = d.opt("check", "strict")
        att = Attachment(f"cert:{mode}", "barrier", (B,), ode, check, float(d.opt("eps", self.ctx.eps)),
                         scaled, None, f)
        summary.update({"level": level, "level_window": [lv.lower, lv.upper], "separating": lv.ok,
                        "check": check,
                        "normalized": "B = V/level - 1"})
        self._register(f"cert:{mode}", att, summary)

    def do_bounded_reach(self, d: Directive):
        self._ensure_root()
        mode = d.opt("mode")
        if mode is None or d.opt("time") is None:
            raise TacticError("bounded-reach needs mode= and time=", d.line)
        T = float(d.opt("time"))
        ode = mode_ode(self.model, mode)
        names = [x for x, _ in ode.eqs]
        clock = d.opt("clock")
        if clock is None:
            clocks = [x for x, t in ode.eqs if t == Const(1.0)]
            clock = clocks[0] if len(clocks) == 1 else None
        init = bounds_from(self.root.goal.assume, names)
        for n, (a, b) in init.items():
            if not (math.isfinite(a) and math.isfinite(b)):
                raise TacticError(f"initial states do not bound {n}", d.line)
        ibox = Box(tuple(names), [init[n][0] for n in names], [init[n][1] for n in names])
        rvars = set(names)
        for _, t in ode.eqs:
            rvars |= term_vars(t) | term_lvars(t)
        hb = bounds_from(ode.domain, rvars)
        dom = self.ctx.checker.domain
        lo, hi, rn = [], [], sorted(rvars)
        for n in rn:
            a, b = dom.get(n, (-math.inf, math.inf))
            lo.append(max(a, hb[n][0]))
            hi.append(min(b, hb[n][1]))
        env = bounded_reach_envelope(ode, ibox, T, Box(tuple(rn), lo, hi))
        t0 = init[clock][0] if clock else 0.0
        comps = tuple(env.components(clock, t0))
        f = env.formula(clock, t0)
        self.ctx.envelopes[mode] = env
        att = Attachment(f"reach:{mode}", "envelope", comps, ode, "weak", self.ctx.eps, env, None, f)
        self._register(f"reach:{mode}", att, {"kind": "envelope", "mode": mode, "time": T,
                                              "clock": clock, **env.to_json()})

    def do_discrete_cert(self, d: Directive):
        self._ensure_root()
        if not self.model.symbols.modes:
            raise TacticError("the model declares no modes", d.line)
        var, table = next(iter(self.model.symbols.modes.items()))
        start = [s for s in (d.opt("start") or "").split(",") if s]
        bad = [s for s in (d.opt("bad") or "fail").split(",") if s]
        for m in start + bad:
            if m not in table:
                raise TacticError(f"unknown mode {m!r}", d.line)
        body = self.root.goal.program.body if isinstance(self.root.goal.program, Star) else None
        if body is None:
            raise TacticError("discrete-cert needs a loop goal", d.line)
        graph = mode_graph(body, var, table, bad)
        unreach = discrete_unreachable(graph, start)
        ok = set(bad) <= unreach
        entry = {"name": "discrete", "kind": "discrete", "start": start, "bad": bad,
                 "unreachable": sorted(unreach), "certificate": ok,
                 "edges": [[a, b] for a, b, _ in graph.edges]}
        self.certificates.append(entry)
        if ok:
            self.formulas["discrete"] = conj(*[Not(Cmp("=", Var(var), Const(float(table[b])))) for b in bad])
        self.ctx.log.append(f"discrete-cert: unreachable {sorted(unreach)}")

    def do_auto(self, d: Directive):
        self._ensure_root()
        budget = d.opt("budget")
        if budget is not None:
            self.ctx.budget = self.ctx.steps + int(budget)
        self.ctx.discharge(self.root)

    # ----------------------------------------------------------- report

    def report(self) -> dict:
        root = self.root
        open_leaves = [
            {"goal": leaf.goal.pretty(), "reason": leaf.reason, "status": leaf.status,
             **({"witness": leaf.witness} if leaf.witness is not None else {})}
            for leaf in root.leaves() if not leaf.closed
        ]
        return {
            "goal": self.goal_name,
            "status": root.status,
            "delta": self.ctx.delta,
            "eps": self.ctx.eps,
            "backend": BACKEND,
            "tactics": list(self.applied),
            "certificates": self.certificates,
            "queries": self.ctx.checker.queries,
            "boxes": self.ctx.checker.boxes,
            "open": open_leaves,
            "log": list(self.ctx.log),
            "tree": root.to_json(),
        }


def _lvars(f: Formula) -> set[str]:
    from ..hp.ast import formula_terms
    out: set[str] = set()
    for t in formula_terms(f):
        out |= term_lvars(t)
    return out


def run_proof(model, tactics: str, delta: float = DEFAULT_DELTA, eps: float = DEFAULT_EPS,
              max_boxes=None, base_dir=None) -> ProofResult:
    if isinstance(model, str):
        model = parse_model(model)
    runner = TacticRunner(model, delta, eps, max_boxes, base_dir)
    return runner.run(parse_tactics(tactics))
