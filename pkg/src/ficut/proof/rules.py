"""The proof rules: loop invariant, forward invariant cut and barrier."""
from __future__ import annotations

from typing import Sequence

from ..hp.ast import (
    And, Const, Formula, Not, Ode, Star, Term, conj, eq, has_modality, le, lt,
)
from ..hp.transforms import cut_restrict
from ..icp.lie import lie_derivative
from .goals import Goal


class ShapeError(ValueError):
    """A rule was applied to a goal of the wrong shape."""


def _star_body(g: Goal):
    if not isinstance(g.program, Star):
        raise ShapeError(f"expected a goal of shape I -> [a*]S, got {g.pretty()}")
    return g.program.body


def apply_invariant_rule(g: Goal, C: Formula) -> tuple[Goal, Goal, Goal]:
    """I -> [a*]S  from  I -> C,  C -> [a]C,  C -> S."""
    body = _star_body(g)
    if has_modality(C):
        raise ShapeError("invariant must be modality-free")
    return Goal(g.assume, None, C), Goal(C, body, C), Goal(C, None, g.post)


def apply_fwd_inv_cut(g: Goal, C: Formula) -> tuple[Goal, Goal, Goal]:
    """I -> [a*]S  from  I & !C -> [(a; ?!C)*]S,  C -> [a]C,  C -> S."""
    body = _star_body(g)
    if has_modality(C):
        raise ShapeError("cut formula must be modality-free")
    first = Goal(And(g.assume, Not(C)), Star(cut_restrict(body, C)), g.post)
    return first, Goal(C, body, C), Goal(C, None, g.post)


def barrier_premises(
    g: Goal,
    barriers: Sequence[Term],
    frame: Formula,
    check: str = "weak",
    eps: float = 1e-6,
) -> list[Goal]:
    """Premises of the barrier rule for ``init -> [{x' = f & H}] safe``.

    With components B_1..B_k the invariant set is {B_j <= 0 for all j}.
    The premises are init -> B <= 0, one decrease premise per component,
    and B <= 0 & H & frame -> safe, where ``frame`` collects assumptions
    over variables the flow does not change.

    ``strict`` (one component only) asks for dB/dt <= -eps on B = 0.
    ``weak`` asks for dB_k/dt <= 0 on {B_j <= eps for all j}, an open
    neighbourhood of the invariant set: dB/dt <= 0 on the closed set
    alone admits flows leaving degenerate sets such as {x^2 <= 0}.
    """
    if not isinstance(g.program, Ode):
        raise ShapeError(f"barrier rule needs a single ODE, got {g.pretty()}")
    if not barriers:
        raise ShapeError("no barrier components")
    if check not in ("weak", "strict"):
        raise ValueError(f"unknown decrease check {check!r}")
    if check == "strict" and len(barriers) != 1:
        raise ShapeError("the strict boundary check takes a single barrier")
    ode = g.program
    zero = Const(0.0)
    inside = conj(*[le(b, zero) for b in barriers])
    goals = [Goal(g.assume, None, inside)]
    for b in barriers:
        bdot = lie_derivative(b, ode.eqs)
        if check == "strict":
            goals.append(Goal(conj(ode.domain, frame, eq(b, zero)), None, le(bdot, Const(-eps))))
        else:
            near = conj(*[le(c, Const(eps)) for c in barriers])
            goals.append(Goal(conj(ode.domain, frame, near), None, le(bdot, zero)))
    goals.append(Goal(conj(inside, ode.domain, frame), None, g.post))
    return goals


def apply_barrier_rule(g: Goal, B, frame: Formula = None, check: str = "weak",
                       eps: float = 1e-6) -> list[Goal]:
    """Barrier rule for a certificate object or a term."""
    from ..hp.ast import TRUE
    term = B.barrier_term() if hasattr(B, "barrier_term") else B
    return barrier_premises(g, [term], frame if frame is not None else TRUE, check, eps)
