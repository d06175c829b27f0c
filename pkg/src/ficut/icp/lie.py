"""Symbolic differentiation and Lie derivatives.

Simplification is limited to the 0/1 identities, which keeps derivative
terms small without a general rewriting engine.
"""
from __future__ import annotations

from typing import Sequence

from ..hp.ast import (
    Add, Const, Div, LVar, Mul, Neg, Pow, Sqrt, Sub, Term, Var,
)

ZERO = Const(0.0)
ONE = Const(1.0)


def _is(t: Term, v: float) -> bool:
    return isinstance(t, Const) and t.value == v


def s_add(a: Term, b: Term) -> Term:
    if _is(a, 0.0):
        return b
    if _is(b, 0.0):
        return a
    return Add(a, b)


def s_sub(a: Term, b: Term) -> Term:
    if _is(b, 0.0):
        return a
    if _is(a, 0.0):
        return s_neg(b)
    return Sub(a, b)


def s_neg(a: Term) -> Term:
    if _is(a, 0.0):
        return ZERO
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


def s_mul(a: Term, b: Term) -> Term:
    if _is(a, 0.0) or _is(b, 0.0):
        return ZERO
    if _is(a, 1.0):
        return b
    if _is(b, 1.0):
        return a
    return Mul(a, b)


def s_div(a: Term, b: Term) -> Term:
    if _is(a, 0.0):
        return ZERO
    if _is(b, 1.0):
        return a
    return Div(a, b)


def diff(t: Term, x: str) -> Term:
    """Partial derivative of ``t`` with respect to state variable ``x``."""
    if isinstance(t, (Const, LVar)):
        return ZERO
    if isinstance(t, Var):
        return ONE if t.name == x else ZERO
    if isinstance(t, Neg):
        return s_neg(diff(t.arg, x))
    if isinstance(t, Add):
        return s_add(diff(t.left, x), diff(t.right, x))
    if isinstance(t, Sub):
        return s_sub(diff(t.left, x), diff(t.right, x))
    if isinstance(t, Mul):
        return s_add(s_mul(diff(t.left, x), t.right), s_mul(t.left, diff(t.right, x)))
    if isinstance(t, Div):
        du, dv = diff(t.left, x), diff(t.right, x)
        if _is(dv, 0.0):
            return s_div(du, t.right)
        return s_div(s_sub(s_mul(du, t.right), s_mul(t.left, dv)), Pow(t.right, 2))
    if isinstance(t, Pow):
        n = t.exp
        if n == 0:
            return ZERO
        du = diff(t.base, x)
        if n == 1:
            return du
        inner = t.base if n == 2 else Pow(t.base, n - 1)
        return s_mul(s_mul(Const(float(n)), inner), du)
    if isinstance(t, Sqrt):
        du = diff(t.arg, x)
        return s_div(du, s_mul(Const(2.0), t))
    raise TypeError(f"cannot differentiate {t!r}")


def lie_derivative(v: Term, field: Sequence[tuple[str, Term]]) -> Term:
    """Return the sum over i of (dV/dx_i) * f_i."""
    out: Term = ZERO
    for x, f in field:
        out = s_add(out, s_mul(diff(v, x), f))
    return out
