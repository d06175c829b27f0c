import random

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ficut.certsynth.lyapunov import solve_lyapunov_linear
from ficut.hp.ast import Const, Mul, Neg, Var
from ficut.hp.evaluate import eval_term
from ficut.hp.parser import SymbolTable, parse_term
from ficut.icp.lie import diff, lie_derivative

from strategies import rand_poly_term

SYM = SymbolTable(state_vars=["x", "x1", "x2"])
Q1_FIELD = (("x1", parse_term("-(x2 + 1)*x1", SYM)), ("x2", parse_term("x1^2", SYM)))


def fd_lie(V, field, point, h=1e-5):
    """Central difference of V along the field direction at ``point``."""
    f = {x: eval_term(point, {}, t) for x, t in field}
    fwd = {k: v + h * f.get(k, 0.0) for k, v in point.items()}
    bwd = {k: v - h * f.get(k, 0.0) for k, v in point.items()}
    return (eval_term(fwd, {}, V) - eval_term(bwd, {}, V)) / (2 * h)


def test_one_dimensional_chain_rule():
    d = lie_derivative(parse_term("x^2", SYM), (("x", Neg(Var("x"))),))
    for v in (-2.0, 0.5, 3.0):
        assert eval_term({"x": v}, {}, d) == pytest.approx(-2 * v * v)


def test_running_example_first_cut():
    V1 = parse_term("0.5*x1^2 + 0.5*(x2 - 2)^2", SYM)
    d = lie_derivative(V1, Q1_FIELD)
    rng = np.random.default_rng(0)
    for x1, x2 in rng.uniform(-10, 10, size=(100, 2)):
        got = eval_term({"x1": x1, "x2": x2}, {}, d)
        assert abs(got - (-3 * x1 * x1)) <= 1e-9 * max(1.0, abs(got))


def test_quadratic_form_matches_matrix_identity():
    A = np.array([[-1.0, 4.0], [-0.25, -1.0]])
    cert = solve_lyapunov_linear(A, None, ("x1", "x2"))
    field = tuple((f"x{i + 1}", parse_term(f"{A[i, 0]}*x1 + {A[i, 1]}*x2", SYM)) for i in range(2))
    d = lie_derivative(cert.value_term(), field)
    M = A.T @ cert.matrix + cert.matrix @ A
    rng = np.random.default_rng(1)
    for x in rng.uniform(-3, 3, size=(50, 2)):
        want = float(x @ M @ x)
        assert eval_term({"x1": x[0], "x2": x[1]}, {}, d) == pytest.approx(want, abs=1e-9)


def test_partial_derivative_of_constant():
    assert eval_term({}, {}, diff(Const(3.0), "x")) == 0.0


@given(st.integers(0, 10 ** 6))
def test_agrees_with_finite_differences(seed):
    rng = random.Random(seed)
    names = ("x1", "x2")
    V = rand_poly_term(rng, names)
    field = tuple((n, rand_poly_term(rng, names, 2)) for n in names)
    point = {n: rng.uniform(-2, 2) for n in names}
    exact = eval_term(point, {}, lie_derivative(V, field))
    approx = fd_lie(V, field, point)
    assert abs(exact - approx) <= 1e-4 * max(1.0, abs(exact))
