import math
import random

import pytest
from hypothesis import given, strategies as st

from ficut.hp.ast import (
    FALSE, TRUE, And, Assign, Box, Choice, Cmp, Const, LVar, Not, Ode, Or, Seq, Sqrt, Star, Sub,
    Test as QTest, Var, Div,
)
from ficut.hp.evaluate import UnsupportedConstruct, eval_formula, eval_term
from ficut.hp.oracle import Grid, GridOracle, enumerate_transitions
from ficut.hp.parser import ParseError, SymbolTable, UndeclaredError, parse_formula, parse_model, parse_program, parse_term
from ficut.hp.printer import pretty_print
from ficut.hp.transforms import cut_restrict, restrict

from strategies import VARS, formulas, programs, rand_formula, rand_program, states, terms

SYM = SymbolTable(state_vars=["x", "y", "z", "x1", "x2", "M"], logical_vars=["p"])
GRID3 = Grid.from_dict({v: [0.0, 1.0, 2.0] for v in VARS})


# ------------------------------------------------------------------ parsing


def test_mode_program_parses_to_guarded_flow(model_text):
    m = parse_model(model_text("running_example.hp"))
    p = m.programs["m0"]
    assert isinstance(p, Seq)
    assert p.left == QTest(Cmp("=", Var("M"), Const(0.0)))
    assert isinstance(p.right, Ode)
    assert [x for x, _ in p.right.eqs] == ["x1", "x2"]


def test_skip_is_test_true():
    assert parse_program("?(true)", SYM) == QTest(TRUE)


def test_undeclared_variable_reports_position():
    with pytest.raises(UndeclaredError) as e:
        parse_model("statevar x1, x2.\nbad ::= x3 := 1.\n")
    assert (e.value.line, e.value.col) == (2, 9)


def test_syntax_error_has_line_and_column():
    with pytest.raises(ParseError) as e:
        parse_model("statevar x.\nP ::= x := ;\n")
    assert e.value.line == 2 and e.value.col > 0


def test_mode_names_are_interned(model_text):
    m = parse_model(model_text("running_example.hp"))
    assert m.symbols.modes["M"] == {"q0": 0, "q1": 1, "q2": 2, "fail": 3}


def test_bundled_models_parse(model_text):
    for name in ("running_example.hp", "switched.hp", "fuel_control.hp"):
        m = parse_model(model_text(name))
        assert m.programs and m.formulas


@given(terms)
def test_term_round_trip(t):
    assert parse_term(pretty_print(t), SYM) == t


@given(formulas)
def test_formula_round_trip(f):
    assert parse_formula(pretty_print(f), SYM) == f


@given(programs)
def test_program_round_trip(p):
    assert parse_program(pretty_print(p), SYM) == p


# ---------------------------------------------------------------- evaluation


def test_eval_sum_of_squares():
    t = parse_term("x1^2 + x2^2", SYM)
    assert eval_term({"x1": 2.0, "x2": 3.0}, {}, t) == 13.0


def test_eval_logical_variable():
    assert eval_term({}, {"p": 5.0}, LVar("p")) == 5.0


def test_eval_intake_square_root():
    # sqrt(p/c11 - (p/c11)^2) with c11 = 1 at p = 0.8987
    p = Var("x")
    t = Sqrt(Sub(Div(p, Const(1.0)), Div(p, Const(1.0)) ** 2))
    v = eval_term({"x": 0.8987}, {}, t)
    assert v == pytest.approx(math.sqrt(0.8987 - 0.8987 ** 2), abs=1e-15)
    assert v == pytest.approx(0.3017255541050508, abs=1e-12)


def test_eval_strict_inside_disc():
    assert eval_formula({"x1": 0.0, "x2": 0.0}, {}, parse_formula("x1^2 + x2^2 < 1", SYM))


def test_fail_guard_fires():
    f = parse_formula("x1 < -10 | x1 > 10", SYM)
    assert eval_formula({"x1": 11.0}, {}, f)
    assert not eval_formula({"x1": 3.0}, {}, f)


def test_modality_is_not_pointwise():
    with pytest.raises(UnsupportedConstruct):
        eval_formula({"x": 0.0}, {}, Box(QTest(TRUE), TRUE))


@given(formulas, formulas, states)
def test_de_morgan(a, b, s):
    try:
        lhs = eval_formula(s, {}, Not(And(a, b)))
    except ArithmeticError:
        return
    assert lhs == eval_formula(s, {}, Or(Not(a), Not(b)))


# ---------------------------------------------------------------- transforms


def test_cut_restrict_appends_negated_test():
    a = Assign("x", Const(1.0))
    C = Cmp(">", Var("x"), Const(0.0))
    assert cut_restrict(a, C) == Seq(a, QTest(Not(C)))


def test_cut_restrict_false_is_alpha_semantically():
    a = Choice(Assign("x", Const(0.0)), Assign("x", Const(2.0)))
    assert enumerate_transitions(cut_restrict(a, FALSE), GRID3) == enumerate_transitions(a, GRID3)


def test_cut_restrict_true_is_empty():
    a = Assign("x", Const(1.0))
    assert len(enumerate_transitions(cut_restrict(a, TRUE), GRID3)) == 0


def test_restrict_assignment():
    a = Assign("x", Const(1.0))
    D = Cmp(">=", Var("x"), Const(0.0))
    assert restrict(a, D) == Seq(QTest(D), Seq(a, QTest(D)))


def test_restrict_test():
    D = Cmp(">=", Var("x"), Const(0.0))
    phi = Cmp("=", Var("x"), Const(0.0))
    assert restrict(QTest(phi), D) == QTest(And(phi, D))


def test_restrict_true_is_identity_on_grid():
    rng = random.Random(11)
    for _ in range(30):
        a = rand_program(rng)
        assert enumerate_transitions(restrict(a, TRUE), GRID3) == enumerate_transitions(a, GRID3)


# -------------------------------------------------------------------- oracle


def test_choice_of_assignments():
    g = Grid.from_dict({"x": [0.0, 1.0]})
    a = Choice(Assign("x", Const(0.0)), Assign("x", Const(1.0)))
    pairs = {(v[0], w[0]) for v, w in enumerate_transitions(a, g).pairs}
    assert pairs == {(0, 0), (0, 1), (1, 0), (1, 1)}


def test_test_keeps_matching_states():
    g = Grid.from_dict({"x": [0.0, 1.0]})
    rel = enumerate_transitions(QTest(Cmp("=", Var("x"), Const(0.0))), g)
    assert rel.pairs == {((0.0,), (0.0,))}


def test_star_increment_is_upper_triangle():
    g = Grid.from_dict({"x": [0.0, 1.0, 2.0]})
    a = Star(Assign("x", Var("x") + Const(1.0)))
    pairs = {(v[0], w[0]) for v, w in enumerate_transitions(a, g).pairs}
    assert pairs == {(v, w) for v in range(3) for w in range(3) if w >= v}


def test_oracle_rejects_flows():
    with pytest.raises(ValueError):
        enumerate_transitions(Ode((("x", Const(1.0)),), TRUE), GRID3)


def _compose(r1, r2):
    return {(a, c) for a, b in r1.pairs for b2, c in r2.pairs if b == b2}


@given(st.integers(0, 10 ** 6))
def test_seq_is_composition(seed):
    rng = random.Random(seed)
    a, b = rand_program(rng, 2), rand_program(rng, 2)
    ra, rb = enumerate_transitions(a, GRID3), enumerate_transitions(b, GRID3)
    assert set(enumerate_transitions(Seq(a, b), GRID3).pairs) == _compose(ra, rb)


@given(st.integers(0, 10 ** 6))
def test_choice_is_union(seed):
    rng = random.Random(seed)
    a, b = rand_program(rng, 2), rand_program(rng, 2)
    ra, rb = enumerate_transitions(a, GRID3), enumerate_transitions(b, GRID3)
    assert enumerate_transitions(Choice(a, b), GRID3).pairs == ra.pairs | rb.pairs


@given(st.integers(0, 10 ** 6))
def test_restriction_lemma_sample(seed):
    rng = random.Random(seed)
    a, D = rand_program(rng), rand_formula(rng)
    o = GridOracle(GRID3)
    inside = o.satisfying(D)
    r = enumerate_transitions(restrict(a, D), GRID3)
    full = enumerate_transitions(a, GRID3)
    assert r.pairs <= full.restricted_to(inside).pairs


def test_box_modality_on_grid():
    o = GridOracle(GRID3)
    a = Star(Assign("x", Const(1.0)))
    f = Box(a, Cmp("<=", Var("x"), Const(1.0)))
    assert o.holds(f, (0.0, 0.0, 0.0))
    assert not o.holds(f, (2.0, 0.0, 0.0))


def test_fuel_control_origin_is_equilibrium(model_text):
    from scipy.optimize import brentq
    from ficut.proof.tactics import mode_ode

    m = parse_model(model_text("fuel_control.hp"))
    field = dict(mode_ode(m, "m2").eqs)
    origin = {"p": 0.0, "r": 0.0, "pe": 0.0, "i": 0.0}
    for x, rhs in field.items():
        assert abs(eval_term(origin, {}, rhs)) < 1e-12, x
    # the frozen offset agrees with an independent root of p' = 0
    root = brentq(lambda v: eval_term({**origin, "p": v}, {}, field["p"]), -0.05, 0.05, xtol=1e-15)
    assert abs(root) < 1e-12
