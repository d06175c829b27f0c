import random

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ficut.hp.ast import Const, Neg, Pow, Sqrt, Sub, Var, Mul, Add
from ficut.hp.evaluate import DomainError, eval_term
from ficut.hp.parser import SymbolTable, parse_formula, parse_term
from ficut.icp import kernel, solver
from ficut.icp.interval import Box, Interval, i_div, i_sqrt, interval_eval
from ficut.icp.solver import (
    Constraint, ConstraintSystem, QueryDump, ResourceLimit, check, check_formula, weakened_ok,
)

from strategies import infeasible_system, planted_system, terms

SYM = SymbolTable(state_vars=["x", "y", "z", "x1", "x2"])


def F(text):
    return parse_formula(text, SYM)


def T(text):
    return parse_term(text, SYM)


# --------------------------------------------------------- interval arithmetic


def test_square_uses_tight_rule():
    iv = interval_eval(T("x^2"), {"x": (-2.0, 3.0)})
    assert iv.lo == 0.0 and iv.hi == pytest.approx(9.0)


def test_dependency_not_tracked():
    iv = interval_eval(T("x - x"), {"x": (0.0, 1.0)})
    assert iv.lo == pytest.approx(-1.0) and iv.hi == pytest.approx(1.0)


def test_sqrt_is_monotone():
    iv = interval_eval(Sqrt(Var("x")), {"x": (0.25, 4.0)})
    assert iv.lo == pytest.approx(0.5) and iv.hi == pytest.approx(2.0)


def test_division_by_interval_with_zero_is_whole_line():
    iv = i_div(Interval(1.0, 2.0), Interval(-1.0, 1.0))
    assert iv.lo == -np.inf and iv.hi == np.inf


def test_sqrt_clips_negative_part():
    # the negative part makes the enclosure pessimistic, never an error
    iv = i_sqrt(Interval(-1.0, 4.0))
    assert iv.lo == 0.0 and iv.hi >= 2.0


@given(terms, st.lists(st.floats(-3, 3), min_size=3, max_size=3),
       st.lists(st.floats(0, 2), min_size=3, max_size=3),
       st.lists(st.floats(0, 1), min_size=3, max_size=3))
def test_inclusion_isotonicity(t, lo, w, frac):
    env = {n: (a, a + d) for n, a, d in zip("xyz", lo, w)}
    pt = {n: a + f * d for (n, (a, _)), d, f in zip(env.items(), w, frac)}
    try:
        v = eval_term(pt, {}, t)
    except (DomainError, OverflowError):
        return
    iv = interval_eval(t, env)
    assert iv.lo <= v <= iv.hi or not np.isfinite(v)


# -------------------------------------------------------------------- solving


def _sys(cons, names, lo, hi, delta=1e-3):
    return ConstraintSystem(cons, Box(names, [lo] * len(names), [hi] * len(names)), delta)


def test_negative_sum_of_squares_unsat():
    s = _sys([Constraint(T("x^2 + y^2 + 1"), "<=")], ("x", "y"), -10, 10)
    assert check(s).is_unsat


def test_unique_nonnegative_root():
    s = _sys([Constraint(T("x^2 - 4"), "="), Constraint(T("-x"), "<=")], ("x",), -10, 10)
    res = check(s)
    assert not res.is_unsat
    iv = res.witness.interval("x")
    assert iv.width <= 1e-3
    assert abs(0.5 * (iv.lo + iv.hi) - 2.0) <= 1e-3
    assert weakened_ok(s, res.witness.midpoint())


def test_running_example_decrease_query_unsat():
    # V1 <= 5 and dV1/dt = -3 x1^2 > 0
    f = F("0.5*x1^2 + 0.5*(x2 - 2)^2 <= 5 & -3*x1^2 > 0")
    dom = Box(("x1", "x2"), [-10, -10], [10, 10])
    assert check_formula(f, dom, 1e-3).is_unsat


def test_budget_exhaustion_is_not_unsat():
    s = _sys([Constraint(T("x^2 + y^2 - 1"), "=")], ("x", "y"), -1, 1, delta=1e-9)
    with pytest.raises(ResourceLimit):
        check(s, max_boxes=3, relaxation=False)


def test_budget_from_environment(monkeypatch):
    monkeypatch.setenv("FICUT_BOX_BUDGET", "5")
    assert solver.box_budget() == 5


def test_unbounded_domain_rejected():
    with pytest.raises(ValueError):
        _sys([Constraint(T("x"), "<=")], ("x",), -np.inf, 1)


def test_domain_must_cover_variables():
    with pytest.raises(ValueError):
        ConstraintSystem([Constraint(T("x + y"), "<=")], Box(("x",), [0], [1]))


def test_strict_constraint_touching_boundary():
    # x > 1 has no solution on [0, 1]: a box whose lower bound is exactly 0 is pruned
    s = _sys([Constraint(T("1 - x"), "<")], ("x",), 0, 1)
    assert check(s, relaxation=False).is_unsat
    # on [0, 1 + delta/4] it is satisfiable and the witness certifies the weakened system
    s = ConstraintSystem([Constraint(T("1 - x"), "<")], Box(("x",), [0.0], [1.00025]), 1e-3)
    res = check(s, relaxation=False)
    assert not res.is_unsat
    assert weakened_ok(s, res.witness.midpoint())


def test_disjunction_checks_every_branch():
    dom = Box(("x",), [-1], [1])
    assert check_formula(F("x > 2 | x < -2"), dom, 1e-3).is_unsat
    assert not check_formula(F("x > 2 | x < 0.5"), dom, 1e-3).is_unsat


@given(st.integers(0, 10 ** 6))
def test_planted_points_never_unsat(seed):
    s, _ = planted_system(random.Random(seed))
    res = check(s)
    assert not res.is_unsat
    assert weakened_ok(s, res.witness.midpoint())


@given(st.integers(0, 10 ** 6))
def test_sum_of_squares_below_negative_unsat(seed):
    assert check(infeasible_system(random.Random(seed))).is_unsat


def test_determinism():
    s, _ = planted_system(random.Random(4))
    a, b = check(s), check(s)
    assert a == b and a.witness == b.witness


def test_query_dump(tmp_path):
    with QueryDump(tmp_path) as d:
        check(_sys([Constraint(T("x^2 + 1"), "<=")], ("x",), -1, 1))
    assert d.count == 1
    text = (tmp_path / "query_00001.txt").read_text()
    assert "# verdict unsat" in text and "x^2 + 1" in text


# ------------------------------------------------------- backend parity


def _with_backend(monkeypatch, mod):
    monkeypatch.setattr(kernel, "solve", mod.solve)
    monkeypatch.setattr(kernel, "eval_tape", mod.eval_tape)


@pytest.mark.skipif("cython" not in kernel.backends(), reason="compiled kernel not built")
@pytest.mark.parametrize("mean_value", [False, True])
def test_backends_agree(monkeypatch, mean_value):
    mods = kernel.backends()
    rng = random.Random(1)
    systems = [planted_system(rng)[0] for _ in range(15)] + [infeasible_system(rng) for _ in range(5)]
    systems.append(_sys([Constraint(T("x^2*y - x*y^2 + 0.1"), "<="),
                         Constraint(T("x*y - 0.3"), "=")], ("x", "y"), -1, 1))
    out = {}
    for name in ("python", "cython"):
        _with_backend(monkeypatch, mods[name])
        out[name] = [check(s, mean_value=mean_value, relaxation=False) for s in systems]
    for a, b in zip(out["python"], out["cython"]):
        assert a.is_unsat == b.is_unsat
        if not a.is_unsat:
            assert a.witness == b.witness
        assert a.stats["boxes"] == b.stats["boxes"]


def test_mean_value_form_saves_boxes():
    # near-cancelling quadratic form on a thin shell, where natural enclosures overestimate
    f = Sub(Add(Mul(Const(3.0), Pow(Var("x"), 2)), Mul(Const(-2.9), Mul(Var("x"), Var("y")))),
            Const(-0.01))
    s = _sys([Constraint(f, "<=")], ("x", "y"), -1, 1, delta=1e-4)
    plain = check(s, relaxation=False, mean_value=False, max_boxes=10 ** 6)
    mv = check(s, relaxation=False, mean_value=True, max_boxes=10 ** 6)
    assert plain.is_unsat == mv.is_unsat
    assert mv.stats["boxes"] <= plain.stats["boxes"]


def test_linear_relaxation_shortcut():
    s = _sys([Constraint(T("x^2 + y^2 - 2*x*y + 1"), "<=")], ("x", "y"), -5, 5)
    res = check(s)
    assert res.is_unsat
