"""Pretty-printing to the concrete model-file syntax.

The printer inserts the minimum parentheses needed for the parser to
rebuild the same AST, so ``parse(pretty_print(x)) == x``.
"""
from __future__ import annotations

from .ast import (
    Add, And, Assign, Box, Choice, Cmp, Const, Diamond, Div, Exists, FalseF,
    Forall, Formula, Havoc, Implies, LVar, Mul, Neg, Not, Ode, Or, Pow,
    Program, Seq, Sqrt, Star, Sub, Term, Test, TrueF, Var,
)


def fmt_number(v: float) -> str:
    r = repr(float(v))
    if r in ("inf", "-inf", "nan"):
        raise ValueError(f"non-finite constant {r}")
    return r


def _term_prec(t: Term) -> int:
    if isinstance(t, (Add, Sub)):
        return 1
    if isinstance(t, (Mul, Div)):
        return 2
    if isinstance(t, Neg):
        return 3
    if isinstance(t, Const) and (t.value < 0 or fmt_number(t.value).startswith("-")):
        return 3
    if isinstance(t, Pow):
        return 4
    return 5


def _t(t: Term, need: int) -> str:
    s = _term_raw(t)
    return f"({s})" if _term_prec(t) < need else s


def _term_raw(t: Term) -> str:
    if isinstance(t, Const):
        return fmt_number(t.value)
    if isinstance(t, (Var, LVar)):
        return t.name
    if isinstance(t, Add):
        return f"{_t(t.left, 1)} + {_t(t.right, 2)}"
    if isinstance(t, Sub):
        return f"{_t(t.left, 1)} - {_t(t.right, 2)}"
    if isinstance(t, Mul):
        return f"{_t(t.left, 2)} * {_t(t.right, 3)}"
    if isinstance(t, Div):
        return f"{_t(t.left, 2)} / {_t(t.right, 3)}"
    if isinstance(t, Neg):
        a = t.arg
        # "-3.0" would re-parse as a negative literal, so keep the parens
        if isinstance(a, Const) and _term_prec(a) == 5:
            return f"-({_term_raw(a)})"
        return "-" + _t(a, 3)
    if isinstance(t, Pow):
        return f"{_t(t.base, 5)}^{t.exp}"
    if isinstance(t, Sqrt):
        return f"sqrt({_term_raw(t.arg)})"
    raise TypeError(f"not a term: {t!r}")


def _formula_prec(f: Formula) -> int:
    if isinstance(f, Implies):
        return 1
    if isinstance(f, Or):
        return 2
    if isinstance(f, And):
        return 3
    if isinstance(f, Not) and not (isinstance(f.arg, Cmp) and f.arg.op == "="):
        return 4
    if isinstance(f, (Forall, Exists, Box, Diamond)):
        return 4
    return 5


def _f(f: Formula, need: int) -> str:
    s = _formula_raw(f)
    return f"({s})" if _formula_prec(f) < need else s


def _formula_raw(f: Formula) -> str:
    if isinstance(f, TrueF):
        return "true"
    if isinstance(f, FalseF):
        return "false"
    if isinstance(f, Cmp):
        return f"{_term_raw(f.left)} {f.op} {_term_raw(f.right)}"
    if isinstance(f, Not):
        if isinstance(f.arg, Cmp) and f.arg.op == "=":
            return f"{_term_raw(f.arg.left)} != {_term_raw(f.arg.right)}"
        return "!" + _f(f.arg, 4)
    if isinstance(f, And):
        return f"{_f(f.left, 3)} & {_f(f.right, 4)}"
    if isinstance(f, Or):
        return f"{_f(f.left, 2)} | {_f(f.right, 3)}"
    if isinstance(f, Implies):
        return f"{_f(f.left, 2)} -> {_f(f.right, 1)}"
    if isinstance(f, Forall):
        return f"forall {f.var}. {_f(f.body, 4)}"
    if isinstance(f, Exists):
        return f"exists {f.var}. {_f(f.body, 4)}"
    if isinstance(f, Box):
        return f"[{_program_raw(f.program)}]{_f(f.post, 4)}"
    if isinstance(f, Diamond):
        return f"<{_program_raw(f.program)}>{_f(f.post, 4)}"
    raise TypeError(f"not a formula: {f!r}")


def _program_prec(p: Program) -> int:
    if isinstance(p, Choice):
        return 1
    if isinstance(p, Seq):
        return 2
    return 3


def _p(p: Program, need: int) -> str:
    s = _program_raw(p)
    return "{" + s + "}" if _program_prec(p) < need else s


def _program_raw(p: Program) -> str:
    if isinstance(p, Assign):
        return f"{p.var} := {_term_raw(p.term)}"
    if isinstance(p, Havoc):
        return f"{p.var} := *"
    if isinstance(p, Test):
        return f"?({_formula_raw(p.cond)})"
    if isinstance(p, Ode):
        eqs = ", ".join(f"{x}' = {_term_raw(t)}" for x, t in p.eqs)
        return "{" + eqs + " & " + _formula_raw(p.domain) + "}"
    if isinstance(p, Choice):
        return f"{_p(p.left, 2)} ++ {_p(p.right, 1)}"
    if isinstance(p, Seq):
        return f"{_p(p.left, 3)}; {_p(p.right, 2)}"
    if isinstance(p, Star):
        return "{" + _program_raw(p.body) + "}*"
    raise TypeError(f"not a program: {p!r}")


def pretty_print(x) -> str:
    """Render a Term, Formula or Program in model-file syntax."""
    if isinstance(x, Term):
        return _term_raw(x)
    if isinstance(x, Formula):
        return _formula_raw(x)
    if isinstance(x, Program):
        return _program_raw(x)
    raise TypeError(f"cannot print {x!r}")
