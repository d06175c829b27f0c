import random

import pytest
from hypothesis import given, settings, strategies as st

from ficut.hp.ast import (
    FALSE, TRUE, And, Box as BoxF, Cmp, Const, Implies, Not, Ode, Star, Test as QTest, Var, conj,
)
from ficut.hp.oracle import Grid, GridOracle, enumerate_transitions
from ficut.hp.parser import SymbolTable, parse_formula, parse_model, parse_term
from ficut.hp.printer import pretty_print
from ficut.hp.transforms import cut_restrict
from ficut.icp.interval import Box
from ficut.proof import (
    CLOSED, OPEN, ArithChecker, Goal, ModeGraph, ProofContext, ProofNode, ShapeError,
    apply_barrier_rule, apply_fwd_inv_cut, apply_invariant_rule, bounded_reach_envelope,
    discrete_unreachable, mode_graph, run_proof,
)
from ficut.proof.tactics import NonlinearMode, TacticError, linear_matrix, mode_ode, parse_tactics

from strategies import GRID_VALUES, VARS, rand_formula, rand_program, rule_fuzz

GRID3 = Grid.from_dict({v: list(GRID_VALUES) for v in VARS})


@pytest.fixture(scope="module")
def running(model_text=None):
    from conftest import MODELS
    return parse_model((MODELS / "running_example.hp").read_text())


def F(m, text):
    return parse_formula(text, m.symbols, m.formulas)


# -------------------------------------------------------------------- rules


def test_invariant_rule_children():
    I, C, S = (Cmp("<=", Var("x"), Const(v)) for v in (0.0, 1.0, 2.0))
    alpha = QTest(TRUE)
    a, b, c = apply_invariant_rule(Goal(I, Star(alpha), S), C)
    assert a == Goal(I, None, C) and b == Goal(C, alpha, C) and c == Goal(C, None, S)


def test_invariant_rule_with_postcondition_as_invariant():
    S = Cmp("<=", Var("x"), Const(2.0))
    I = Cmp("<=", Var("x"), Const(0.0))
    kids = apply_invariant_rule(Goal(I, Star(QTest(TRUE)), S), S)
    assert [pretty_print(k.formula()) for k in kids] == [
        "x <= 0.0 -> x <= 2.0", "x <= 2.0 -> [?(true)]x <= 2.0", "x <= 2.0 -> x <= 2.0"]


def test_false_invariant_fails_first_premise():
    o = GridOracle(GRID3)
    I = Cmp("<=", Var("x"), Const(1.0))
    first = apply_invariant_rule(Goal(I, Star(QTest(TRUE)), TRUE), FALSE)[0]
    assert not o.valid(first.formula())


def test_fwd_inv_cut_children():
    I, C, S = (Cmp("<=", Var("x"), Const(v)) for v in (0.0, 1.0, 2.0))
    alpha = QTest(TRUE)
    a, b, c = apply_fwd_inv_cut(Goal(I, Star(alpha), S), C)
    assert a == Goal(And(I, Not(C)), Star(cut_restrict(alpha, C)), S)
    assert b == Goal(C, alpha, C) and c == Goal(C, None, S)


@given(st.integers(0, 10 ** 6))
def test_fwd_inv_cut_prints_as_premises(seed):
    rng = random.Random(seed)
    I, S, C = rand_formula(rng), rand_formula(rng), rand_formula(rng)
    alpha = rand_program(rng, 2, star=False)
    kids = apply_fwd_inv_cut(Goal(I, Star(alpha), S), C)
    p = pretty_print
    assert [k.pretty() for k in kids] == [
        p(Implies(And(I, Not(C)), BoxF(Star(cut_restrict(alpha, C)), S))),
        p(Implies(C, BoxF(alpha, C))),
        p(Implies(C, S)),
    ]


def test_total_cut():
    I, S = Cmp("<=", Var("x"), Const(0.0)), Cmp("<=", Var("x"), Const(2.0))
    a, b, c = apply_fwd_inv_cut(Goal(I, Star(QTest(TRUE)), S), TRUE)
    assert b.assume == TRUE and b.post == TRUE and c == Goal(TRUE, None, S)
    assert a.assume == And(I, Not(TRUE))


def test_rules_need_a_loop():
    with pytest.raises(ShapeError):
        apply_fwd_inv_cut(Goal(TRUE, QTest(TRUE), TRUE), TRUE)


def test_fwd_inv_cut_sound_on_grid():
    held, bad = rule_fuzz(apply_fwd_inv_cut, 60, seed=123)
    assert bad == 0 and held > 0


def test_invariant_rule_sound_on_grid():
    held, bad = rule_fuzz(apply_invariant_rule, 60, seed=321)
    assert bad == 0 and held > 0


@given(st.integers(0, 10 ** 6))
@settings(max_examples=40)
def test_cut_runs_avoid_cut_set(seed):
    # runs of (alpha; ?!C)* from !C are exactly the alpha* runs that never enter C
    rng = random.Random(seed)
    alpha, C = rand_program(rng, 2, star=False), rand_formula(rng)
    o = GridOracle(GRID3)
    outside = o.satisfying(Not(C))
    cut = enumerate_transitions(Star(cut_restrict(alpha, C)), GRID3)
    step = enumerate_transitions(alpha, GRID3)
    want = set()
    for v in outside:
        seen, todo = {v}, [v]
        while todo:
            u = todo.pop()
            for w in step.successors(u):
                if w in outside and w not in seen:
                    seen.add(w)
                    todo.append(w)
        want |= {(v, w) for w in seen}
    assert {(v, w) for v, w in cut.pairs if v in outside} == want


# ------------------------------------------------------------ barrier rule


def _q1_goal(running, B_level=5.0):
    ode = mode_ode(running, "m1")
    inside = parse_formula(f"0.5*x1^2 + 0.5*(x2 - 2)^2 <= {B_level}", running.symbols)
    return Goal(inside, ode, inside), ode


def _discharge_all(ctx, goals):
    out = []
    for g in goals:
        n = ProofNode(g)
        ctx.discharge(n)
        out.append(n)
    return out


def test_barrier_weak_check_running_example(running):
    g, _ = _q1_goal(running)
    B = parse_term("0.5*x1^2 + 0.5*(x2 - 2)^2 - 5", running.symbols)
    ctx = ProofContext(running, delta=1e-3)
    init, dec, safe = _discharge_all(ctx, apply_barrier_rule(g, B, check="weak"))
    assert init.closed and dec.closed and safe.closed


def test_barrier_strict_check_stalls_where_derivative_vanishes(running):
    g, _ = _q1_goal(running)
    B = parse_term("0.5*x1^2 + 0.5*(x2 - 2)^2 - 5", running.symbols)
    ctx = ProofContext(running, delta=1e-3)
    dec = _discharge_all(ctx, apply_barrier_rule(g, B, check="strict"))[1]
    assert not dec.closed
    assert abs(sum(dec.witness["x1"]) / 2) < 1e-2


def test_barrier_misset_level_fails_init(running):
    ode = mode_ode(running, "m1")
    init = parse_formula("x1 = 0 & x2 = 6", running.symbols)
    g = Goal(init, ode, TRUE)
    B = parse_term("0.5*x1^2 + 0.5*(x2 - 2)^2 - 5", running.symbols)
    first = _discharge_all(ProofContext(running, delta=1e-3), apply_barrier_rule(g, B))[0]
    assert not first.closed and first.witness is not None


def test_barrier_needs_flow():
    with pytest.raises(ShapeError):
        apply_barrier_rule(Goal(TRUE, QTest(TRUE), TRUE), Const(0.0))


# ------------------------------------------------------------ reach, graphs


def test_recovery_envelope():
    ode = Ode((("r", Var("l2")),), TRUE)
    init = Box(("r",), [-0.001], [0.001])
    env = bounded_reach_envelope(ode, init, 0.008, Box(("r",), [-0.2], [0.2]), rates={"r": (-0.17, 0.18)})
    lo, hi = env.bounds("r")
    assert lo == pytest.approx(-0.00236, abs=1e-9) and hi == pytest.approx(0.00244, abs=1e-9)
    assert -0.1 < lo and hi < 0.1


def test_zero_time_envelope_is_init():
    ode = Ode((("x", Neg_x()),), TRUE)
    init = Box(("x",), [0.2], [0.3])
    env = bounded_reach_envelope(ode, init, 0.0, Box(("x",), [-1], [1]))
    assert env.box == init


def Neg_x():
    from ficut.hp.ast import Neg
    return Neg(Var("x"))


def test_interval_rates_from_domain():
    env = bounded_reach_envelope(Ode((("x", Neg_x()),), TRUE), Box(("x",), [0.0], [0.0]), 1.0,
                                 Box(("x",), [-1], [1]))
    assert env.bounds("x")[0] <= -1.0 and env.bounds("x")[1] >= 1.0
    assert env.provenance["x"] == "interval"


def test_running_example_fail_reachable(running):
    body = running.formulas["Ex"].right.program.body
    g = mode_graph(body, "M", running.symbols.modes["M"], bad=["fail"])
    assert "fail" not in discrete_unreachable(g, ["q0"])


def test_bad_mode_without_incoming_edges():
    g = ModeGraph(("a", "b", "bad"), (("a", "b", ""), ("b", "a", "")))
    assert "bad" in discrete_unreachable(g, ["a"])


def test_empty_graph():
    g = ModeGraph(("q0", "q1", "q2"), ())
    assert discrete_unreachable(g, ["q0"]) == {"q1", "q2"}


# ------------------------------------------------------------------ discharge


def test_postcondition_implied_by_mode(running):
    fc = parse_model(__import__("conftest").MODELS.joinpath("fuel_control.hp").read_text())
    ctx = ProofContext(fc, delta=1e-2)
    n = ProofNode(Goal(parse_formula("M = normal & r <= 0.01", fc.symbols), None, fc.formulas["S"]))
    ctx.discharge(n)
    assert n.closed and n.rule == "propositional"


def test_second_cut_branch_excises_other_modes(running):
    from ficut.certsynth import QuadraticCertificate
    from ficut.proof.discharge import Attachment
    ctx = ProofContext(running, delta=1e-3)
    cert = QuadraticCertificate(((2.0, 0.0), (0.0, 4.0)), ("x1", "x2"), 16.0)
    ctx.attach(Attachment("cert:m2", "quadratic", (parse_term("2*x1^2 + 4*x2^2 - 16", running.symbols),),
                          mode_ode(running, "m2"), "weak", cert=cert))
    C2 = running.formulas["C2"]
    body = running.formulas["Ex"].right.program.body
    n = ProofNode(Goal(C2, body, C2))
    ctx.discharge(n)
    assert n.closed
    # m0, s01, m1, s02 and mfail by their mode tests, sfail because V2 <= 16 misses its guard
    excised = [k for k in n.walk() if k.rule == "excise"]
    assert len(excised) == 6


def test_nonlinear_flow_without_certificate_stays_open(running):
    ctx = ProofContext(running, delta=1e-3)
    # true (x2 gains at most the integral of exp(-2t)), but needs a certificate
    g = Goal(parse_formula("M = q1 & x1 = 1 & x2 = 0", running.symbols), mode_ode(running, "m1"),
             parse_formula("x2 <= 0.5", running.symbols))
    n = ProofNode(g)
    ctx.discharge(n)
    assert not n.closed
    assert any(k.status == OPEN and k.reason for k in n.leaves())


def test_closure_is_monotone(running):
    res = run_proof(running, (__import__("conftest").MODELS / "running_example.tactics").read_text(),
                    delta=1e-3, base_dir=__import__("conftest").MODELS)
    root = res.root
    before = {id(n): n.status for n in root.walk()}
    res.ctx.discharge(root)
    root.update()
    for n in root.walk():
        if before.get(id(n)) == CLOSED:
            assert n.status == CLOSED


def test_arith_checker_splits_modes(running):
    ck = ArithChecker(running.domain, running.symbols.modes, 1e-3)
    v = ck.valid(parse_formula("M = q1 | M = q2", running.symbols),
                 parse_formula("M != fail", running.symbols))
    assert v.unsat


def test_arith_checker_components(running):
    ck = ArithChecker({"a": (-1, 1), "b": (-1, 1)}, {}, 1e-3)
    v = ck.satisfiable(parse_formula("a^2 <= 0.25 & b^2 + 1 <= 0", SymbolTable(state_vars=["a", "b"])))
    assert v.unsat


# ------------------------------------------------------------------ tactics


def test_tactic_parsing():
    ds = parse_tactics("# header\ngoal Ex\ncut C1  # first\nsynth-barrier mode=m2 degree=2\n")
    assert [d.name for d in ds] == ["goal", "cut", "synth-barrier"]
    assert ds[2].opt("degree") == "2" and list(ds[1].args) == ["C1"] and ds[1].line == 3


def test_unknown_directive():
    with pytest.raises(TacticError) as e:
        parse_tactics("goal Ex\nfrobnicate\n")
    assert e.value.line == 2


def test_nonlinear_mode_detected(running):
    with pytest.raises(NonlinearMode):
        linear_matrix(mode_ode(running, "m1"))


def test_linear_mode_matrix(running):
    A, names = linear_matrix(mode_ode(running, "m2"))
    assert names == ("x1", "x2") and A.tolist() == [[-3.0, 13.0], [-5.0, -1.0]]


def test_auto_alone_leaves_goal_open(running):
    res = run_proof(running, "goal Ex\nauto\n", delta=1e-3)
    assert not res.closed
    assert res.report["open"] and all(o["reason"] for o in res.report["open"])
