"""Lexer and recursive-descent parser for model files.

Model files hold one definition per ``.``-terminated statement::

    statevar x1, x2, M.
    logicalvar p.
    modes M: q0, q1, fail.          # interns q0 -> 0, q1 -> 1, ...
    modes K: one = 1, two = 2.      # explicit integer values
    const c = 0.5.                  # named numeric constant
    def V = 0.5*x1^2 + x2^2.        # term macro, inlined at use sites
    domain x1 in [-10, 10], x2 in [-10, 10].
    step ::= ?(M = q0); {x1' = -x1, x2' = -x2 & true}.
    Safe :== M != fail.

Identifiers in program position that name an earlier program, and in
formula position that name an earlier formula, are inlined.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field

from .ast import (
    Add, And, Assign, Box, Choice, Cmp, Const, Diamond, Div, Exists, FALSE,
    Forall, Formula, Havoc, Implies, LVar, Mul, Neg, Not, Ode, Or, Pow,
    Program, Seq, Sqrt, Star, Sub, TRUE, Term, Test, Var,
)


class ParseError(Exception):
    """Syntax error carrying a 1-based line and column."""

    def __init__(self, msg: str, line: int = 0, col: int = 0):
        self.line, self.col = line, col
        super().__init__(f"{line}:{col}: {msg}" if line else msg)


class UndeclaredError(ParseError):
    pass


class DuplicateError(ParseError):
    pass


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+|\#[^\n]*)
  | (?P<num>(?:\d+\.\d+|\d+|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<id>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>::=|:==|:=|\+\+|->|!=|<=|>=|[<>=&|!?;,.(){}\[\]*+\-/^':])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str  # num | id | op | eof
    text: str
    line: int
    col: int


def tokenize(text: str) -> list[Token]:
    toks: list[Token] = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        s = m.group()
        if kind != "ws":
            toks.append(Token(kind, s, line, pos - line_start + 1))
        nl = s.count("\n")
        if nl:
            line += nl
            line_start = pos + s.rfind("\n") + 1
        pos = m.end()
    toks.append(Token("eof", "", line, pos - line_start + 1))
    return toks


@dataclass
class SymbolTable:
    """Classifies identifiers and records model-level metadata."""

    state_vars: list[str] = field(default_factory=list)
    logical_vars: list[str] = field(default_factory=list)
    modes: dict[str, dict[str, int]] = field(default_factory=dict)
    consts: dict[str, float] = field(default_factory=dict)
    macros: dict[str, Term] = field(default_factory=dict)
    domain: dict[str, tuple[float, float]] = field(default_factory=dict)

    def mode_value(self, name: str):
        for table in self.modes.values():
            if name in table:
                return table[name]
        return None

    def mode_name(self, var: str, value: float):
        for n, v in self.modes.get(var, {}).items():
            if v == value:
                return n
        return None

    def is_declared(self, name: str) -> bool:
        return (
            name in self.state_vars
            or name in self.logical_vars
            or name in self.consts
            or name in self.macros
            or self.mode_value(name) is not None
        )


@dataclass
class Model:
    symbols: SymbolTable
    programs: dict[str, Program]
    formulas: dict[str, Formula]
    order: list[str] = field(default_factory=list)

    @property
    def state_vars(self) -> list[str]:
        return self.symbols.state_vars

    @property
    def domain(self) -> dict[str, tuple[float, float]]:
        return self.symbols.domain


_CMP_TOKENS = {"=", "<=", "<", ">=", ">", "!="}
_TERM_CONT = {"+", "-", "*", "/", "^"} | _CMP_TOKENS


class Parser:
    def __init__(self, text: str, symbols: SymbolTable | None = None,
                 programs: dict | None = None, formulas: dict | None = None):
        self.toks = tokenize(text)
        self.i = 0
        self.sym = symbols if symbols is not None else SymbolTable()
        self.programs: dict[str, Program] = programs if programs is not None else {}
        self.formulas: dict[str, Formula] = formulas if formulas is not None else {}
        self.order: list[str] = []

    # -- token helpers
    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def peek(self, k: int = 1) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def error(self, msg: str, tok: Token | None = None, cls=ParseError):
        t = tok or self.tok
        raise cls(msg, t.line, t.col)

    def at(self, text: str) -> bool:
        return self.tok.kind in ("op", "id") and self.tok.text == text

    def accept(self, text: str) -> bool:
        if self.at(text):
            self.i += 1
            return True
        return False

    def expect(self, text: str) -> Token:
        if not self.at(text):
            shown = self.tok.text or "end of input"
            self.error(f"expected {text!r}, found {shown!r}")
        t = self.tok
        self.i += 1
        return t

    def ident(self) -> Token:
        if self.tok.kind != "id":
            self.error(f"expected identifier, found {self.tok.text or 'end of input'!r}")
        t = self.tok
        self.i += 1
        return t

    # -- model
    def parse_model(self) -> Model:
        while self.tok.kind != "eof":
            self.statement()
        return Model(self.sym, self.programs, self.formulas, self.order)

    def _check_fresh(self, tok: Token):
        n = tok.text
        if self.sym.is_declared(n) or n in self.programs or n in self.formulas:
            self.error(f"duplicate definition of {n!r}", tok, DuplicateError)

    def statement(self):
        t = self.tok
        if t.kind != "id":
            self.error("expected a declaration or definition")
        kw = t.text
        if kw in ("statevar", "logicalvar") and self.peek().kind == "id":
            self.i += 1
            names = [self.ident()]
            while self.accept(","):
                names.append(self.ident())
            self.expect(".")
            for n in names:
                self._check_fresh(n)
                (self.sym.state_vars if kw == "statevar" else self.sym.logical_vars).append(n.text)
            return
        if kw == "modes" and self.peek().kind == "id" and self.peek(2).text == ":":
            self.i += 1
            var = self.ident()
            if var.text not in self.sym.state_vars:
                self.error(f"mode variable {var.text!r} must be a declared statevar", var, UndeclaredError)
            self.expect(":")
            names = [self._mode_item()]
            while self.accept(","):
                names.append(self._mode_item())
            self.expect(".")
            table = self.sym.modes.setdefault(var.text, {})
            for n, v in names:
                self._check_fresh(n)
                if v is None:
                    v = max(table.values(), default=-1) + 1
                if v in table.values():
                    self.error(f"mode value {v} used twice", n, DuplicateError)
                table[n.text] = v
            return
        if kw in ("const", "def") and self.peek().kind == "id" and self.peek(2).text == "=":
            self.i += 1
            name = self.ident()
            self._check_fresh(name)
            self.expect("=")
            term = self.term()
            self.expect(".")
            if kw == "const":
                from .evaluate import eval_term
                self.sym.consts[name.text] = eval_term({}, {}, term)
            else:
                self.sym.macros[name.text] = term
            return
        if kw == "domain" and self.peek().kind == "id" and self.peek(2).text == "in":
            self.i += 1
            while True:
                var = self.ident()
                if var.text not in self.sym.state_vars and var.text not in self.sym.logical_vars:
                    self.error(f"undeclared variable {var.text!r}", var, UndeclaredError)
                self.expect("in")
                self.expect("[")
                lo = self._const_value()
                self.expect(",")
                hi = self._const_value()
                self.expect("]")
                if not lo <= hi:
                    self.error(f"empty domain for {var.text!r}", var)
                self.sym.domain[var.text] = (lo, hi)
                if not self.accept(","):
                    break
            self.expect(".")
            return
        # named program or formula
        name = self.ident()
        if self.at("::="):
            self._check_fresh(name)
            self.i += 1
            prog = self.program()
            self._end()
            self.programs[name.text] = prog
        elif self.at(":=="):
            self._check_fresh(name)
            self.i += 1
            f = self.formula()
            self._end()
            self.formulas[name.text] = f
        else:
            self.error(f"expected '::=' or ':==' after {name.text!r}")
        self.order.append(name.text)

    def _mode_item(self):
        # ``name`` or ``name = <integer>``
        n = self.ident()
        if not self.accept("="):
            return n, None
        t = self.tok
        neg = self.accept("-")
        t = self.tok
        if t.kind != "num" or not re.fullmatch(r"\d+", t.text):
            self.error("mode values must be integers", t)
        self.i += 1
        return n, -int(t.text) if neg else int(t.text)

    def _end(self):
        # the final definition of a file may omit its terminating '.'
        if self.tok.kind != "eof":
            self.expect(".")

    def _const_value(self) -> float:
        from .evaluate import eval_term
        t = self.term()
        try:
            return eval_term({}, {}, t)
        except Exception:
            self.error("domain bounds must be constant")

    # -- terms
    def term(self) -> Term:
        left = self.product()
        while self.tok.kind == "op" and self.tok.text in ("+", "-"):
            op = self.tok.text
            self.i += 1
            right = self.product()
            left = Add(left, right) if op == "+" else Sub(left, right)
        return left

    def product(self) -> Term:
        left = self.unary()
        while self.tok.kind == "op" and self.tok.text in ("*", "/"):
            op = self.tok.text
            self.i += 1
            right = self.unary()
            left = Mul(left, right) if op == "*" else Div(left, right)
        return left

    def unary(self) -> Term:
        if self.at("-"):
            self.i += 1
            if self.tok.kind == "num" and not (self.peek().kind == "op" and self.peek().text == "^"):
                v = float(self.tok.text)
                self.i += 1
                return Const(-v)
            return Neg(self.unary())
        return self.power()

    def power(self) -> Term:
        base = self.atom()
        if self.accept("^"):
            t = self.tok
            if t.kind != "num" or not re.fullmatch(r"\d+", t.text):
                self.error("exponent must be a natural-number literal")
            self.i += 1
            return Pow(base, int(t.text))
        return base

    def atom(self) -> Term:
        t = self.tok
        if t.kind == "num":
            self.i += 1
            return Const(float(t.text))
        if self.accept("("):
            e = self.term()
            self.expect(")")
            return e
        if t.kind == "id":
            if t.text == "sqrt" and self.peek().text == "(":
                self.i += 2
                e = self.term()
                self.expect(")")
                return Sqrt(e)
            self.i += 1
            n = t.text
            if n in self.sym.state_vars:
                return Var(n)
            if n in self.sym.logical_vars:
                return LVar(n)
            if n in self.sym.consts:
                return Const(self.sym.consts[n])
            if n in self.sym.macros:
                return self.sym.macros[n]
            mv = self.sym.mode_value(n)
            if mv is not None:
                return Const(float(mv))
            self.error(f"undeclared variable {n!r}", t, UndeclaredError)
        self.error(f"expected a term, found {t.text or 'end of input'!r}")

    # -- formulas
    def formula(self) -> Formula:
        left = self.disjunction()
        if self.accept("->"):
            return Implies(left, self.formula())
        return left

    def disjunction(self) -> Formula:
        left = self.conjunction()
        while self.accept("|"):
            left = Or(left, self.conjunction())
        return left

    def conjunction(self) -> Formula:
        left = self.unary_formula()
        while self.accept("&"):
            left = And(left, self.unary_formula())
        return left

    def unary_formula(self) -> Formula:
        t = self.tok
        if self.accept("!"):
            return Not(self.unary_formula())
        if t.kind == "id" and t.text in ("forall", "exists") and self.peek().kind == "id" \
                and self.peek(2).text == ".":
            self.i += 1
            v = self.ident()
            if v.text not in self.sym.logical_vars:
                self.error(f"quantified variable {v.text!r} must be a logicalvar", v, UndeclaredError)
            self.expect(".")
            body = self.unary_formula()
            return (Forall if t.text == "forall" else Exists)(v.text, body)
        if self.accept("["):
            p = self.program()
            self.expect("]")
            return Box(p, self.unary_formula())
        if self.accept("<"):
            p = self.program()
            self.expect(">")
            return Diamond(p, self.unary_formula())
        return self.formula_atom()

    def formula_atom(self) -> Formula:
        t = self.tok
        if t.kind == "id" and t.text in ("true", "false") and not self._continues_term(1):
            self.i += 1
            return TRUE if t.text == "true" else FALSE
        if t.kind == "id" and t.text in self.formulas and not self._continues_term(1):
            self.i += 1
            return self.formulas[t.text]
        if t.text == "(" and t.kind == "op":
            save = self.i
            try:
                self.i += 1
                f = self.formula()
                self.expect(")")
                if not self._continues_term(0):
                    return f
            except ParseError:
                pass
            self.i = save
        return self.comparison()

    def _continues_term(self, k: int) -> bool:
        t = self.peek(k)
        return t.kind == "op" and t.text in _TERM_CONT

    def comparison(self) -> Formula:
        left = self.term()
        t = self.tok
        if t.kind != "op" or t.text not in _CMP_TOKENS:
            self.error(f"expected a comparison operator, found {t.text or 'end of input'!r}")
        self.i += 1
        right = self.term()
        if t.text == "!=":
            return Not(Cmp("=", left, right))
        return Cmp(t.text, left, right)

    # -- programs
    def program(self) -> Program:
        left = self.sequence()
        if self.accept("++"):
            return Choice(left, self.program())
        return left

    def sequence(self) -> Program:
        left = self.program_atom()
        if self.accept(";"):
            return Seq(left, self.sequence())
        return left

    def program_atom(self) -> Program:
        t = self.tok
        if self.accept("?"):
            return Test(self.unary_formula())
        if self.at("{"):
            if self.peek().kind == "id" and self.peek(2).text == "'":
                return self.ode()
            self.i += 1
            body = self.program()
            self.expect("}")
            if self.accept("*"):
                return Star(body)
            return body
        if t.kind == "id":
            if self.peek().text == ":=":
                self.i += 2
                if t.text not in self.sym.state_vars:
                    self.error(f"undeclared variable {t.text!r}", t, UndeclaredError)
                if self.accept("*"):
                    return Havoc(t.text)
                return Assign(t.text, self.term())
            if t.text in self.programs:
                self.i += 1
                return self.programs[t.text]
            self.error(f"undeclared program or variable {t.text!r}", t, UndeclaredError)
        self.error(f"expected a program, found {t.text or 'end of input'!r}")

    def ode(self) -> Ode:
        start = self.expect("{")
        eqs = []
        while True:
            v = self.ident()
            if v.text not in self.sym.state_vars:
                self.error(f"undeclared variable {v.text!r}", v, UndeclaredError)
            self.expect("'")
            self.expect("=")
            eqs.append((v.text, self.term()))
            if not self.accept(","):
                break
        dom = TRUE
        if self.accept("&"):
            dom = self.formula()
        self.expect("}")
        try:
            return Ode(tuple(eqs), dom)
        except ValueError as e:
            raise ParseError(str(e), start.line, start.col) from None


def parse_model(text: str) -> Model:
    """Parse a complete model file."""
    return Parser(text).parse_model()


def _parse_fragment(text: str, symbols: SymbolTable | None, method: str, programs=None, formulas=None):
    p = Parser(text, symbols or SymbolTable(), programs, formulas)
    out = getattr(p, method)()
    if p.tok.kind != "eof":
        p.error(f"unexpected trailing input {p.tok.text!r}")
    return out


def parse_term(text: str, symbols: SymbolTable | None = None) -> Term:
    return _parse_fragment(text, symbols, "term")


def parse_formula(text: str, symbols: SymbolTable | None = None, formulas=None) -> Formula:
    return _parse_fragment(text, symbols, "formula", formulas=formulas)


def parse_program(text: str, symbols: SymbolTable | None = None, programs=None) -> Program:
    return _parse_fragment(text, symbols, "program", programs=programs)
