"""Abstract syntax for terms, formulas and hybrid programs.

All nodes are frozen dataclasses, so they compare structurally, hash, and
can be shared freely.  Terms support Python arithmetic operators, which
makes hand-written ASTs in tests and certificate code short.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Union

Number = Union[int, float]


# ---------------------------------------------------------------- terms


class Term:
    """Base class of real-valued expressions."""

    __slots__ = ()

    def __add__(self, other):
        return Add(self, as_term(other))

    def __radd__(self, other):
        return Add(as_term(other), self)

    def __sub__(self, other):
        return Sub(self, as_term(other))

    def __rsub__(self, other):
        return Sub(as_term(other), self)

    def __mul__(self, other):
        return Mul(self, as_term(other))

    def __rmul__(self, other):
        return Mul(as_term(other), self)

    def __truediv__(self, other):
        return Div(self, as_term(other))

    def __rtruediv__(self, other):
        return Div(as_term(other), self)

    def __pow__(self, n: int):
        return Pow(self, n)

    def __neg__(self):
        return Neg(self)


@dataclass(frozen=True)
class Const(Term):
    value: float

    def __post_init__(self):
        object.__setattr__(self, "value", float(self.value))


@dataclass(frozen=True)
class Var(Term):
    """State variable."""

    name: str


@dataclass(frozen=True)
class LVar(Term):
    """Logical (rigid) variable."""

    name: str


@dataclass(frozen=True)
class Neg(Term):
    arg: Term


@dataclass(frozen=True)
class Add(Term):
    left: Term
    right: Term


@dataclass(frozen=True)
class Sub(Term):
    left: Term
    right: Term


@dataclass(frozen=True)
class Mul(Term):
    left: Term
    right: Term


@dataclass(frozen=True)
class Div(Term):
    left: Term
    right: Term


@dataclass(frozen=True)
class Pow(Term):
    base: Term
    exp: int

    def __post_init__(self):
        if not isinstance(self.exp, int) or isinstance(self.exp, bool) or self.exp < 0:
            raise ValueError(f"power exponent must be a natural number, got {self.exp!r}")


@dataclass(frozen=True)
class Sqrt(Term):
    arg: Term


def as_term(x) -> Term:
    if isinstance(x, Term):
        return x
    if isinstance(x, (int, float)) and not isinstance(x, bool):
        return Const(float(x))
    raise TypeError(f"cannot use {x!r} as a term")


# ------------------------------------------------------------- formulas


class Formula:
    """Base class of dL formulas."""

    __slots__ = ()

    def __and__(self, other):
        return And(self, other)

    def __or__(self, other):
        return Or(self, other)

    def __invert__(self):
        return Not(self)


@dataclass(frozen=True)
class TrueF(Formula):
    pass


@dataclass(frozen=True)
class FalseF(Formula):
    pass


TRUE = TrueF()
FALSE = FalseF()

CMP_OPS = ("=", ">=", ">", "<=", "<")


@dataclass(frozen=True)
class Cmp(Formula):
    op: str
    left: Term
    right: Term

    def __post_init__(self):
        if self.op not in CMP_OPS:
            raise ValueError(f"unknown comparison {self.op!r}")


@dataclass(frozen=True)
class Not(Formula):
    arg: Formula


@dataclass(frozen=True)
class And(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Or(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Implies(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Forall(Formula):
    var: str
    body: Formula


@dataclass(frozen=True)
class Exists(Formula):
    var: str
    body: Formula


@dataclass(frozen=True)
class Box(Formula):
    program: "Program"
    post: Formula


@dataclass(frozen=True)
class Diamond(Formula):
    program: "Program"
    post: Formula


def cmp(op: str, a, b) -> Cmp:
    return Cmp(op, as_term(a), as_term(b))


def eq(a, b) -> Cmp:
    return cmp("=", a, b)


def le(a, b) -> Cmp:
    return cmp("<=", a, b)


def lt(a, b) -> Cmp:
    return cmp("<", a, b)


def ge(a, b) -> Cmp:
    return cmp(">=", a, b)


def gt(a, b) -> Cmp:
    return cmp(">", a, b)


def conj(*fs: Formula) -> Formula:
    """Right-nested conjunction; the empty conjunction is true."""
    fs = [f for f in fs if f != TRUE]
    if not fs:
        return TRUE
    out = fs[-1]
    for f in reversed(fs[:-1]):
        out = And(f, out)
    return out


def disj(*fs: Formula) -> Formula:
    fs = [f for f in fs if f != FALSE]
    if not fs:
        return FALSE
    out = fs[-1]
    for f in reversed(fs[:-1]):
        out = Or(f, out)
    return out


def conjuncts(f: Formula) -> list[Formula]:
    """Flatten nested conjunctions (``true`` vanishes)."""
    if isinstance(f, And):
        return conjuncts(f.left) + conjuncts(f.right)
    if f == TRUE:
        return []
    return [f]


# ------------------------------------------------------------- programs


class Program:
    """Base class of hybrid programs."""

    __slots__ = ()


@dataclass(frozen=True)
class Assign(Program):
    var: str
    term: Term


@dataclass(frozen=True)
class Havoc(Program):
    var: str


@dataclass(frozen=True)
class Ode(Program):
    eqs: tuple  # tuple[tuple[str, Term], ...]
    domain: Formula = TRUE

    def __post_init__(self):
        eqs = tuple((str(x), t) for x, t in self.eqs)
        names = [x for x, _ in eqs]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate variable in ode {names}")
        object.__setattr__(self, "eqs", eqs)

    @property
    def vars(self) -> tuple[str, ...]:
        return tuple(x for x, _ in self.eqs)


@dataclass(frozen=True)
class Test(Program):
    cond: Formula


@dataclass(frozen=True)
class Choice(Program):
    left: Program
    right: Program


@dataclass(frozen=True)
class Seq(Program):
    left: Program
    right: Program


@dataclass(frozen=True)
class Star(Program):
    body: Program


SKIP = Test(TRUE)


def seq(*ps: Program) -> Program:
    if not ps:
        return SKIP
    out = ps[-1]
    for p in reversed(ps[:-1]):
        out = Seq(p, out)
    return out


def choice(*ps: Program) -> Program:
    if not ps:
        return Test(FALSE)
    out = ps[-1]
    for p in reversed(ps[:-1]):
        out = Choice(p, out)
    return out


def choice_branches(p: Program) -> list[Program]:
    if isinstance(p, Choice):
        return choice_branches(p.left) + choice_branches(p.right)
    return [p]


def seq_items(p: Program) -> list[Program]:
    if isinstance(p, Seq):
        return seq_items(p.left) + seq_items(p.right)
    return [p]


# ----------------------------------------------------------- traversals


def term_children(t: Term) -> tuple[Term, ...]:
    if isinstance(t, (Add, Sub, Mul, Div)):
        return (t.left, t.right)
    if isinstance(t, (Neg, Sqrt)):
        return (t.arg,)
    if isinstance(t, Pow):
        return (t.base,)
    return ()


def iter_term(t: Term) -> Iterator[Term]:
    stack = [t]
    while stack:
        node = stack.pop()
        yield node
        stack.extend(term_children(node))


def term_vars(t: Term) -> set[str]:
    return {n.name for n in iter_term(t) if isinstance(n, Var)}


def term_lvars(t: Term) -> set[str]:
    return {n.name for n in iter_term(t) if isinstance(n, LVar)}


def formula_terms(f: Formula) -> Iterator[Term]:
    if isinstance(f, Cmp):
        yield f.left
        yield f.right
    elif isinstance(f, Not):
        yield from formula_terms(f.arg)
    elif isinstance(f, (And, Or, Implies)):
        yield from formula_terms(f.left)
        yield from formula_terms(f.right)
    elif isinstance(f, (Forall, Exists)):
        yield from formula_terms(f.body)
    elif isinstance(f, (Box, Diamond)):
        yield from program_terms(f.program)
        yield from formula_terms(f.post)


def program_terms(p: Program) -> Iterator[Term]:
    if isinstance(p, Assign):
        yield p.term
    elif isinstance(p, Ode):
        for _, t in p.eqs:
            yield t
        yield from formula_terms(p.domain)
    elif isinstance(p, Test):
        yield from formula_terms(p.cond)
    elif isinstance(p, (Choice, Seq)):
        yield from program_terms(p.left)
        yield from program_terms(p.right)
    elif isinstance(p, Star):
        yield from program_terms(p.body)


def formula_vars(f: Formula) -> set[str]:
    out: set[str] = set()
    for t in formula_terms(f):
        out |= term_vars(t)
    if isinstance(f, (Box, Diamond)) or _has_modality(f):
        out |= _modal_bound_vars(f)
    return out


def _has_modality(f: Formula) -> bool:
    if isinstance(f, (Box, Diamond)):
        return True
    if isinstance(f, Not):
        return _has_modality(f.arg)
    if isinstance(f, (And, Or, Implies)):
        return _has_modality(f.left) or _has_modality(f.right)
    if isinstance(f, (Forall, Exists)):
        return _has_modality(f.body)
    return False


def _modal_bound_vars(f: Formula) -> set[str]:
    out: set[str] = set()
    if isinstance(f, (Box, Diamond)):
        out |= program_written_vars(f.program)
        out |= _modal_bound_vars(f.post)
    elif isinstance(f, Not):
        out |= _modal_bound_vars(f.arg)
    elif isinstance(f, (And, Or, Implies)):
        out |= _modal_bound_vars(f.left) | _modal_bound_vars(f.right)
    elif isinstance(f, (Forall, Exists)):
        out |= _modal_bound_vars(f.body)
    return out


def has_modality(f: Formula) -> bool:
    return _has_modality(f)


def has_quantifier(f: Formula) -> bool:
    if isinstance(f, (Forall, Exists)):
        return True
    if isinstance(f, Not):
        return has_quantifier(f.arg)
    if isinstance(f, (And, Or, Implies)):
        return has_quantifier(f.left) or has_quantifier(f.right)
    if isinstance(f, (Box, Diamond)):
        return has_quantifier(f.post)
    return False


def program_vars(p: Program) -> set[str]:
    out = program_written_vars(p)
    for t in program_terms(p):
        out |= term_vars(t)
    return out


def program_written_vars(p: Program) -> set[str]:
    if isinstance(p, (Assign, Havoc)):
        return {p.var}
    if isinstance(p, Ode):
        return set(p.vars)
    if isinstance(p, (Choice, Seq)):
        return program_written_vars(p.left) | program_written_vars(p.right)
    if isinstance(p, Star):
        return program_written_vars(p.body)
    return set()


def program_odes(p: Program) -> list[Ode]:
    if isinstance(p, Ode):
        return [p]
    if isinstance(p, (Choice, Seq)):
        return program_odes(p.left) + program_odes(p.right)
    if isinstance(p, Star):
        return program_odes(p.body)
    return []


def has_ode(p: Program) -> bool:
    return bool(program_odes(p))


def has_star(p: Program) -> bool:
    if isinstance(p, Star):
        return True
    if isinstance(p, (Choice, Seq)):
        return has_star(p.left) or has_star(p.right)
    return False


# --------------------------------------------------------- substitution


def subst_term(t: Term, sigma: dict[str, Term]) -> Term:
    """Simultaneously replace state variables by terms."""
    if isinstance(t, Var):
        return sigma.get(t.name, t)
    if isinstance(t, (Const, LVar)):
        return t
    if isinstance(t, Neg):
        return Neg(subst_term(t.arg, sigma))
    if isinstance(t, Sqrt):
        return Sqrt(subst_term(t.arg, sigma))
    if isinstance(t, Pow):
        return Pow(subst_term(t.base, sigma), t.exp)
    return type(t)(subst_term(t.left, sigma), subst_term(t.right, sigma))


def subst_formula(f: Formula, sigma: dict[str, Term]) -> Formula:
    """Substitute into a modality-free formula.

    Raises ValueError on modalities, whose programs may rebind variables.
    """
    if isinstance(f, (TrueF, FalseF)):
        return f
    if isinstance(f, Cmp):
        return Cmp(f.op, subst_term(f.left, sigma), subst_term(f.right, sigma))
    if isinstance(f, Not):
        return Not(subst_formula(f.arg, sigma))
    if isinstance(f, (And, Or, Implies)):
        return type(f)(subst_formula(f.left, sigma), subst_formula(f.right, sigma))
    if isinstance(f, (Forall, Exists)):
        return type(f)(f.var, subst_formula(f.body, sigma))
    raise ValueError("substitution into a modal formula")


def subst_lvars_term(t: Term, sigma: dict[str, Term]) -> Term:
    if isinstance(t, LVar):
        return sigma.get(t.name, t)
    if isinstance(t, (Const, Var)):
        return t
    if isinstance(t, Neg):
        return Neg(subst_lvars_term(t.arg, sigma))
    if isinstance(t, Sqrt):
        return Sqrt(subst_lvars_term(t.arg, sigma))
    if isinstance(t, Pow):
        return Pow(subst_lvars_term(t.base, sigma), t.exp)
    return type(t)(subst_lvars_term(t.left, sigma), subst_lvars_term(t.right, sigma))
