"""Exact evaluation of terms and first-order formulas under standard arithmetic."""
from __future__ import annotations

import math
from typing import Callable, Mapping

from .ast import (
    Add, And, Box, Cmp, Const, Diamond, Div, Exists, FalseF, Forall, Formula,
    Implies, LVar, Mul, Neg, Not, Or, Pow, Sqrt, Sub, Term, TrueF, Var,
)

State = Mapping[str, float]
Environment = Mapping[str, float]


class DomainError(ArithmeticError):
    """Raised for a negative sqrt argument or a zero divisor."""


class UnsupportedConstruct(ValueError):
    """Raised when a formula contains a modality or a quantifier."""


def eval_term(nu: State, eta: Environment, t: Term) -> float:
    if isinstance(t, Const):
        return t.value
    if isinstance(t, Var):
        return float(nu[t.name])
    if isinstance(t, LVar):
        return float(eta[t.name])
    if isinstance(t, Add):
        return eval_term(nu, eta, t.left) + eval_term(nu, eta, t.right)
    if isinstance(t, Sub):
        return eval_term(nu, eta, t.left) - eval_term(nu, eta, t.right)
    if isinstance(t, Mul):
        return eval_term(nu, eta, t.left) * eval_term(nu, eta, t.right)
    if isinstance(t, Div):
        d = eval_term(nu, eta, t.right)
        if d == 0.0:
            raise DomainError("division by zero")
        return eval_term(nu, eta, t.left) / d
    if isinstance(t, Neg):
        return -eval_term(nu, eta, t.arg)
    if isinstance(t, Pow):
        return eval_term(nu, eta, t.base) ** t.exp
    if isinstance(t, Sqrt):
        a = eval_term(nu, eta, t.arg)
        if a < 0.0:
            raise DomainError(f"sqrt of negative value {a}")
        return math.sqrt(a)
    raise TypeError(f"not a term: {t!r}")


def _cmp(op: str, a: float, b: float) -> bool:
    if op == "=":
        return a == b
    if op == "<=":
        return a <= b
    if op == "<":
        return a < b
    if op == ">=":
        return a >= b
    return a > b


def eval_formula(nu: State, eta: Environment, f: Formula) -> bool:
    if isinstance(f, TrueF):
        return True
    if isinstance(f, FalseF):
        return False
    if isinstance(f, Cmp):
        return _cmp(f.op, eval_term(nu, eta, f.left), eval_term(nu, eta, f.right))
    if isinstance(f, Not):
        return not eval_formula(nu, eta, f.arg)
    if isinstance(f, And):
        return eval_formula(nu, eta, f.left) and eval_formula(nu, eta, f.right)
    if isinstance(f, Or):
        return eval_formula(nu, eta, f.left) or eval_formula(nu, eta, f.right)
    if isinstance(f, Implies):
        return (not eval_formula(nu, eta, f.left)) or eval_formula(nu, eta, f.right)
    if isinstance(f, (Box, Diamond, Forall, Exists)):
        raise UnsupportedConstruct(f"cannot evaluate {type(f).__name__} pointwise")
    raise TypeError(f"not a formula: {f!r}")


def compile_term(t: Term, names: tuple[str, ...], eta: Environment | None = None) -> Callable:
    """Compile a term into a fast closure over a positional value tuple.

    ``names`` fixes the positions of state variables; logical variables are
    bound from ``eta`` at compile time.  The closure follows the semantics
    of ``eval_term``, including its domain errors.
    """
    index = {n: i for i, n in enumerate(names)}
    eta = eta or {}

    def build(t: Term) -> Callable:
        if isinstance(t, Const):
            v = t.value
            return lambda x: v
        if isinstance(t, Var):
            i = index[t.name]
            return lambda x: x[i]
        if isinstance(t, LVar):
            v = float(eta[t.name])
            return lambda x: v
        if isinstance(t, Neg):
            a = build(t.arg)
            return lambda x: -a(x)
        if isinstance(t, Pow):
            a, n = build(t.base), t.exp
            if n == 2:
                def sq(x):
                    v = a(x)
                    return v * v
                return sq
            return lambda x: a(x) ** n
        if isinstance(t, Sqrt):
            a = build(t.arg)

            def sqrt_(x):
                v = a(x)
                if v < 0.0:
                    raise DomainError(f"sqrt of negative value {v}")
                return math.sqrt(v)
            return sqrt_
        a, b = build(t.left), build(t.right)
        if isinstance(t, Add):
            return lambda x: a(x) + b(x)
        if isinstance(t, Sub):
            return lambda x: a(x) - b(x)
        if isinstance(t, Mul):
            return lambda x: a(x) * b(x)
        if isinstance(t, Div):
            def div(x):
                d = b(x)
                if d == 0.0:
                    raise DomainError("division by zero")
                return a(x) / d
            return div
        raise TypeError(f"not a term: {t!r}")

    return build(t)
