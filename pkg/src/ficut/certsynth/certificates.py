"""Certificate data types and their plain-text file format.

File layout (``#`` lines are comments)::

    kind: quadratic                kind: barrier
    mode: m1                       mode: m2
    vars: x1, x2                   vars: p, r, pest, i
    Q: identity                    seed: 1
    seed: none                     delta: 0.01
    delta: none                    level: 0.0012
    level: 1.0                     guard: M = 1.0
    guard: M = 0.0                 verified: no
    P:                             monomials:
    0.3828125 0.46875              1.0 p^2
    0.46875 2.375                  -0.25 p*r

Barrier files list one ``coefficient monomial`` pair per line; a
monomial is ``1`` or a ``*``-separated product of ``var`` or ``var^k``.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from ..hp.ast import (
    Add, And, Const, Formula, Mul, Pow, Sub, Term, Var, conj, le,
)
from ..hp.parser import SymbolTable, parse_formula
from ..hp.printer import fmt_number, pretty_print
from ..icp.interval import Box


class NoCertificate(Exception):
    """Synthesis could not produce a certificate."""


class CertificateFormatError(ValueError):
    pass


def _sum(terms: list[Term]) -> Term:
    out: Optional[Term] = None
    for t in terms:
        out = t if out is None else Add(out, t)
    return out if out is not None else Const(0.0)


@dataclass(frozen=True)
class QuadraticCertificate:
    """Sublevel set {x | xᵀPx <= level} conjoined with an optional guard."""

    P: tuple
    vars: tuple[str, ...]
    level: Optional[float] = None
    guard: Optional[Formula] = None
    cholesky: tuple = ()
    provenance: dict = field(default_factory=dict, compare=False, hash=False)

    def __post_init__(self):
        M = np.asarray(self.P, dtype=float)
        n = len(self.vars)
        if M.shape != (n, n):
            raise ValueError(f"P must be {n}x{n}")
        if np.max(np.abs(M - M.T), initial=0.0) >= 1e-12:
            raise ValueError("P must be symmetric")
        object.__setattr__(self, "P", tuple(tuple(float(v) for v in row) for row in M))
        if not self.cholesky:
            try:
                L = np.linalg.cholesky(M)
            except np.linalg.LinAlgError:
                raise NoCertificate("P is not positive definite") from None
            object.__setattr__(self, "cholesky", tuple(tuple(float(v) for v in r) for r in L))

    @property
    def matrix(self) -> np.ndarray:
        return np.array(self.P)

    def value_term(self) -> Term:
        """xᵀPx as a sum of monomials."""
        parts: list[Term] = []
        n = len(self.vars)
        for i in range(n):
            for j in range(i, n):
                c = self.P[i][j] if i == j else 2.0 * self.P[i][j]
                if c == 0.0:
                    continue
                mono = Pow(Var(self.vars[i]), 2) if i == j else Mul(Var(self.vars[i]), Var(self.vars[j]))
                parts.append(Mul(Const(c), mono))
        return _sum(parts)

    def value(self, x) -> float:
        v = np.asarray(x, dtype=float)
        return float(v @ self.matrix @ v)

    def with_level(self, level: float) -> "QuadraticCertificate":
        return replace(self, level=float(level))

    def with_guard(self, guard: Optional[Formula]) -> "QuadraticCertificate":
        return replace(self, guard=guard)

    def sublevel_formula(self, level: Optional[float] = None) -> Formula:
        lv = self.level if level is None else level
        if lv is None:
            raise ValueError("certificate level is unset")
        return le(self.value_term(), Const(lv))

    def formula(self, level: Optional[float] = None) -> Formula:
        f = self.sublevel_formula(level)
        return And(self.guard, f) if self.guard is not None else f


def monomial_basis(nvars: int, degree: int, include_constant: bool = False) -> list[tuple[int, ...]]:
    """Exponent vectors of all monomials up to ``degree``, by degree then lexicographically."""
    out = []
    lo = 0 if include_constant else 1

    def rec(prefix, remaining, k):
        if k == nvars:
            if remaining == 0:
                out.append(tuple(prefix))
            return
        for e in range(remaining, -1, -1):
            rec(prefix + [e], remaining - e, k + 1)

    for d in range(lo, degree + 1):
        rec([], d, 0)
    return out


def monomial_term(exps: tuple[int, ...], vars: tuple[str, ...]) -> Term:
    out: Optional[Term] = None
    for v, e in zip(vars, exps):
        if e == 0:
            continue
        f: Term = Var(v) if e == 1 else Pow(Var(v), e)
        out = f if out is None else Mul(out, f)
    return out if out is not None else Const(1.0)


def monomial_text(exps: tuple[int, ...], vars: tuple[str, ...]) -> str:
    parts = [v if e == 1 else f"{v}^{e}" for v, e in zip(vars, exps) if e]
    return "*".join(parts) if parts else "1"


@dataclass(frozen=True)
class BarrierCertificate:
    """B = sum_k coeffs[k] * z_k - level over a monomial basis z."""

    vars: tuple[str, ...]
    basis: tuple[tuple[int, ...], ...]
    coeffs: tuple[float, ...]
    level: float = 0.0
    domain: Optional[Box] = None
    eps: float = 1e-6
    guard: Optional[Formula] = None
    verified: bool = False
    provenance: dict = field(default_factory=dict, compare=False, hash=False)

    def __post_init__(self):
        object.__setattr__(self, "vars", tuple(self.vars))
        object.__setattr__(self, "basis", tuple(tuple(int(e) for e in m) for m in self.basis))
        object.__setattr__(self, "coeffs", tuple(float(c) for c in self.coeffs))
        if len(set(self.basis)) != len(self.basis):
            raise ValueError("duplicate monomial in basis")
        if len(self.basis) != len(self.coeffs):
            raise ValueError("basis and coefficient lengths differ")
        for m in self.basis:
            if len(m) != len(self.vars):
                raise ValueError("monomial arity mismatch")

    def value_term(self) -> Term:
        parts = [
            Mul(Const(c), monomial_term(m, self.vars)) if any(m) else Const(c)
            for m, c in zip(self.basis, self.coeffs)
            if c != 0.0
        ]
        return _sum(parts)

    def barrier_term(self) -> Term:
        v = self.value_term()
        return Sub(v, Const(self.level)) if self.level != 0.0 else v

    def value(self, x) -> float:
        x = np.asarray(x, dtype=float)
        total = 0.0
        for m, c in zip(self.basis, self.coeffs):
            total += c * float(np.prod(x ** np.array(m)))
        return total

    def with_level(self, level: float) -> "BarrierCertificate":
        return replace(self, level=float(level))

    def sublevel_formula(self, level: Optional[float] = None) -> Formula:
        lv = self.level if level is None else level
        return le(self.value_term(), Const(lv))

    def formula(self, level: Optional[float] = None) -> Formula:
        f = self.sublevel_formula(level)
        return And(self.guard, f) if self.guard is not None else f


# ------------------------------------------------------------- file I/O


def _fmt_opt(v) -> str:
    return "none" if v is None else (fmt_number(v) if isinstance(v, float) else str(v))


def write_certificate(cert, path: str | Path) -> None:
    Path(path).write_text(format_certificate(cert))


def format_certificate(cert) -> str:
    prov = dict(cert.provenance)
    lines = []
    if isinstance(cert, QuadraticCertificate):
        lines.append("kind: quadratic")
    else:
        lines.append("kind: barrier")
    lines.append(f"mode: {prov.get('mode', 'none')}")
    lines.append("vars: " + ", ".join(cert.vars))
    lines.append(f"Q: {prov.get('Q', 'none')}")
    lines.append(f"seed: {_fmt_opt(prov.get('seed'))}")
    lines.append(f"delta: {_fmt_opt(prov.get('delta'))}")
    lines.append(f"level: {_fmt_opt(cert.level)}")
    lines.append("guard: " + (pretty_print(cert.guard) if cert.guard is not None else "none"))
    if isinstance(cert, QuadraticCertificate):
        lines.append("P:")
        for row in cert.P:
            lines.append(" ".join(fmt_number(v) for v in row))
    else:
        lines.append(f"eps: {fmt_number(cert.eps)}")
        lines.append("verified: " + ("yes" if cert.verified else "no"))
        if cert.domain is not None:
            lines.append("domain: " + ", ".join(
                f"{n} in [{fmt_number(a)}, {fmt_number(b)}]"
                for n, a, b in zip(cert.domain.vars, cert.domain.lo, cert.domain.hi)))
        lines.append("monomials:")
        for m, c in zip(cert.basis, cert.coeffs):
            lines.append(f"{fmt_number(c)} {monomial_text(m, cert.vars)}")
    return "\n".join(lines) + "\n"


def _parse_monomial(text: str, vars: tuple[str, ...]) -> tuple[int, ...]:
    exps = [0] * len(vars)
    if text.strip() == "1":
        return tuple(exps)
    for part in text.split("*"):
        part = part.strip()
        name, _, e = part.partition("^")
        if name not in vars:
            raise CertificateFormatError(f"unknown variable {name!r} in monomial {text!r}")
        exps[vars.index(name)] += int(e) if e else 1
    return tuple(exps)


def read_certificate(path: str | Path, symbols: Optional[SymbolTable] = None):
    return parse_certificate(Path(path).read_text(), symbols)


def parse_certificate(text: str, symbols: Optional[SymbolTable] = None):
    header: dict[str, str] = {}
    body: list[str] = []
    in_body = False
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if in_body:
            body.append(line)
            continue
        key, sep, val = line.partition(":")
        if not sep:
            raise CertificateFormatError(f"bad header line {raw!r}")
        key = key.strip()
        if key in ("P", "monomials"):
            in_body = True
            header["_body"] = key
            continue
        header[key] = val.strip()
    kind = header.get("kind")
    vars_ = tuple(v.strip() for v in header.get("vars", "").split(",") if v.strip())
    if not vars_:
        raise CertificateFormatError("missing vars")

    def opt_float(key):
        v = header.get(key, "none")
        return None if v == "none" else float(v)

    seed = header.get("seed", "none")
    prov = {
        "mode": header.get("mode", "none"),
        "Q": header.get("Q", "none"),
        "seed": None if seed == "none" else int(seed),
        "delta": opt_float("delta"),
    }
    guard = None
    if header.get("guard", "none") != "none":
        sym = symbols
        if sym is None:
            sym = SymbolTable(state_vars=list(vars_))
        guard = parse_formula(header["guard"], sym)
    level = opt_float("level")
    if kind == "quadratic":
        rows = [[float(v) for v in line.split()] for line in body]
        return QuadraticCertificate(tuple(map(tuple, rows)), vars_, level, guard, provenance=prov)
    if kind == "barrier":
        basis, coeffs = [], []
        for line in body:
            c, _, m = line.partition(" ")
            coeffs.append(float(c))
            basis.append(_parse_monomial(m, vars_))
        domain = None
        if "domain" in header:
            items = {}
            for part in header["domain"].split("],"):
                name, _, rng = part.partition(" in ")
                lo, hi = rng.strip().strip("[]").split(",")
                items[name.strip()] = (float(lo), float(hi))
            domain = Box.from_dict(items)
        return BarrierCertificate(
            vars_, tuple(basis), tuple(coeffs), level if level is not None else 0.0, domain,
            float(header.get("eps", "1e-6")), guard, header.get("verified", "no") == "yes",
            provenance=prov,
        )
    raise CertificateFormatError(f"unknown certificate kind {kind!r}")


def conj_guard(guard: Optional[Formula], f: Formula) -> Formula:
    return f if guard is None else conj(guard, f)
