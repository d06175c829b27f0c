"""Exact sparse polynomials with rational coefficients.

Polynomial constraints are expanded into sums of monomials before interval
evaluation.  Expansion removes most dependency blow-up (for example the
Lie derivative of a quadratic form collapses to a single square), and the
exact coefficients feed the linear relaxation in the solver.
"""
from __future__ import annotations

from fractions import Fraction
from typing import Optional

from .hp.ast import (
    Add, Const, Div, LVar, Mul, Neg, Pow, Sqrt, Sub, Term, Var,
)

# A monomial is a sorted tuple of (variable node, exponent >= 1);
# the empty tuple is the constant monomial.
Mono = tuple
Poly = dict


def _key(node) -> tuple:
    return (isinstance(node, LVar), node.name)


def mono_mul(a: Mono, b: Mono) -> Mono:
    if not a:
        return b
    if not b:
        return a
    acc: dict = {}
    for v, e in a + b:
        acc[v] = acc.get(v, 0) + e
    return tuple(sorted(acc.items(), key=lambda it: _key(it[0])))


def mono_degree(m: Mono) -> int:
    return sum(e for _, e in m)


def const(c) -> Poly:
    c = Fraction(c)
    return {(): c} if c != 0 else {}


def var(node) -> Poly:
    return {((node, 1),): Fraction(1)}


def add(p: Poly, q: Poly) -> Poly:
    out = dict(p)
    for m, c in q.items():
        s = out.get(m, 0) + c
        if s:
            out[m] = s
        else:
            out.pop(m, None)
    return out


def scale(p: Poly, k) -> Poly:
    k = Fraction(k)
    if k == 0:
        return {}
    return {m: c * k for m, c in p.items()}


def sub(p: Poly, q: Poly) -> Poly:
    return add(p, scale(q, -1))


def mul(p: Poly, q: Poly) -> Poly:
    out: dict = {}
    for m1, c1 in p.items():
        for m2, c2 in q.items():
            m = mono_mul(m1, m2)
            s = out.get(m, 0) + c1 * c2
            if s:
                out[m] = s
            else:
                out.pop(m, None)
    return out


def power(p: Poly, n: int) -> Poly:
    out = const(1)
    base = p
    while n:
        if n & 1:
            out = mul(out, base)
        n >>= 1
        if n:
            base = mul(base, base)
    return out


def to_poly(t: Term) -> Optional[Poly]:
    """Expand a term into an exact polynomial, or None if it is not one."""
    if isinstance(t, Const):
        return const(Fraction(t.value))
    if isinstance(t, (Var, LVar)):
        return var(t)
    if isinstance(t, Neg):
        a = to_poly(t.arg)
        return None if a is None else scale(a, -1)
    if isinstance(t, Pow):
        a = to_poly(t.base)
        return None if a is None else power(a, t.exp)
    if isinstance(t, Sqrt):
        return None
    a = to_poly(t.left)
    if a is None:
        return None
    b = to_poly(t.right)
    if b is None:
        return None
    if isinstance(t, Add):
        return add(a, b)
    if isinstance(t, Sub):
        return sub(a, b)
    if isinstance(t, Mul):
        return mul(a, b)
    if isinstance(t, Div):
        if set(b) <= {()} and b:
            return scale(a, 1 / b[()])
        return None
    raise TypeError(f"not a term: {t!r}")


def degree(p: Poly) -> int:
    return max((mono_degree(m) for m in p), default=0)


def variables(p: Poly) -> set:
    return {v for m in p for v, _ in m}


def sorted_monos(p: Poly) -> list:
    return sorted(p, key=lambda m: (mono_degree(m), [(_key(v), e) for v, e in m]))


def mono_to_term(m: Mono) -> Optional[Term]:
    out = None
    for v, e in m:
        f = v if e == 1 else Pow(v, e)
        out = f if out is None else Mul(out, f)
    return out


def to_term(p: Poly) -> Term:
    """Render a polynomial as a sum of monomials (floats rounded to nearest)."""
    out: Optional[Term] = None
    for m in sorted_monos(p):
        c = float(p[m])
        mt = mono_to_term(m)
        if mt is None:
            piece: Term = Const(abs(c))
        elif abs(c) == 1.0:
            piece = mt
        else:
            piece = Mul(Const(abs(c)), mt)
        if out is None:
            out = piece if c >= 0 else Neg(piece)
        else:
            out = Add(out, piece) if c >= 0 else Sub(out, piece)
    return out if out is not None else Const(0.0)


def evaluate(p: Poly, values: dict) -> float:
    """Float evaluation; ``values`` maps variable names to numbers."""
    total = 0.0
    for m, c in p.items():
        v = float(c)
        for node, e in m:
            v *= values[node.name] ** e
        total += v
    return total


def quadratic_matrix(p: Poly, names: list[str]):
    """Symmetric matrix H (as Fractions) of the degree-2 part: x^T H x."""
    idx = {n: i for i, n in enumerate(names)}
    n = len(names)
    H = [[Fraction(0)] * n for _ in range(n)]
    for m, c in p.items():
        if mono_degree(m) != 2:
            continue
        if len(m) == 1:
            i = idx[m[0][0].name]
            H[i][i] += c
        else:
            i, j = idx[m[0][0].name], idx[m[1][0].name]
            H[i][j] += c / 2
            H[j][i] += c / 2
    return H
