"""Syntactic program transforms used by the proof rules."""
from __future__ import annotations

from .ast import (
    And, Assign, Choice, Formula, Havoc, Not, Ode, Program, Seq, Star, Test,
    has_modality,
)


def cut_restrict(alpha: Program, cut: Formula) -> Program:
    """Return ``alpha; ?(!cut)``, the loop body of the first cut premise."""
    if has_modality(cut):
        raise ValueError("cut formula must be modality-free")
    return Seq(alpha, Test(Not(cut)))


def restrict(alpha: Program, dom: Formula) -> Program:
    """Restrict every transition of ``alpha`` to states satisfying ``dom``.

    Atomic assignments become ``?dom; a; ?dom``, tests and evolution
    domains are conjoined with ``dom``, and a loop is guarded on entry.
    """
    if has_modality(dom):
        raise ValueError("restriction domain must be modality-free")
    if isinstance(alpha, (Assign, Havoc)):
        return Seq(Test(dom), Seq(alpha, Test(dom)))
    if isinstance(alpha, Test):
        return Test(And(alpha.cond, dom))
    if isinstance(alpha, Ode):
        return Ode(alpha.eqs, And(alpha.domain, dom))
    if isinstance(alpha, Seq):
        return Seq(restrict(alpha.left, dom), restrict(alpha.right, dom))
    if isinstance(alpha, Choice):
        return Choice(restrict(alpha.left, dom), restrict(alpha.right, dom))
    if isinstance(alpha, Star):
        return Seq(Test(dom), Star(restrict(alpha.body, dom)))
    raise TypeError(f"not a program: {alpha!r}")
