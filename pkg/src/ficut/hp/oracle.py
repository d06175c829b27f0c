"""Exact transition semantics of ODE-free programs over a finite grid.

This oracle is the ground truth for the property tests of the proof rules.
Havoc ranges over the grid values of its variable and an assignment whose
value leaves the grid has no transition.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Mapping

from .ast import (
    And, Assign, Box, Choice, Cmp, Diamond, Exists, FalseF, Forall, Formula,
    Havoc, Implies, Not, Ode, Or, Program, Seq, Star, Test, TrueF,
)
from .evaluate import UnsupportedConstruct, eval_formula, eval_term


class OracleError(ValueError):
    """Raised when the oracle meets an ODE."""


GridState = tuple  # values in Grid.vars order


@dataclass(frozen=True)
class Grid:
    vars: tuple[str, ...]
    values: tuple[tuple[float, ...], ...]

    @classmethod
    def from_dict(cls, values: Mapping[str, "list[float]"]) -> "Grid":
        names = tuple(values)
        return cls(names, tuple(tuple(float(v) for v in values[n]) for n in names))

    def states(self) -> list[GridState]:
        return list(itertools.product(*self.values))

    def as_dict(self, s: GridState) -> dict[str, float]:
        return dict(zip(self.vars, s))

    def index(self, var: str) -> int:
        return self.vars.index(var)


@dataclass(frozen=True)
class TransitionRelation:
    grid: Grid
    pairs: frozenset

    def successors(self, s: GridState) -> set:
        return {w for v, w in self.pairs if v == s}

    def __contains__(self, pair) -> bool:
        return pair in self.pairs

    def __len__(self) -> int:
        return len(self.pairs)

    def restricted_to(self, states: set) -> "TransitionRelation":
        return TransitionRelation(
            self.grid, frozenset((v, w) for v, w in self.pairs if v in states and w in states)
        )


class GridOracle:
    """Cached relation builder plus modal-formula evaluation on a grid."""

    def __init__(self, grid: Grid, eta: Mapping[str, float] | None = None, star_bound: int = 1000):
        self.grid = grid
        self.eta = dict(eta or {})
        self.star_bound = star_bound
        self.states = grid.states()
        self._cache: dict[Program, dict] = {}

    # relation as successor map: state -> frozenset of states
    def succ_map(self, alpha: Program) -> dict:
        hit = self._cache.get(alpha)
        if hit is not None:
            return hit
        out = self._build(alpha)
        self._cache[alpha] = out
        return out

    def _build(self, alpha: Program) -> dict:
        g = self.grid
        if isinstance(alpha, Assign):
            k = g.index(alpha.var)
            allowed = set(g.values[k])
            out = {}
            for s in self.states:
                v = eval_term(g.as_dict(s), self.eta, alpha.term)
                out[s] = frozenset([s[:k] + (v,) + s[k + 1:]]) if v in allowed else frozenset()
            return out
        if isinstance(alpha, Havoc):
            k = g.index(alpha.var)
            return {s: frozenset(s[:k] + (v,) + s[k + 1:] for v in g.values[k]) for s in self.states}
        if isinstance(alpha, Test):
            return {s: frozenset([s]) if self.holds(alpha.cond, s) else frozenset() for s in self.states}
        if isinstance(alpha, Choice):
            a, b = self.succ_map(alpha.left), self.succ_map(alpha.right)
            return {s: a[s] | b[s] for s in self.states}
        if isinstance(alpha, Seq):
            a, b = self.succ_map(alpha.left), self.succ_map(alpha.right)
            return {s: frozenset().union(*(b[m] for m in a[s])) for s in self.states}
        if isinstance(alpha, Star):
            body = self.succ_map(alpha.body)
            out = {}
            for s in self.states:
                seen = {s}
                frontier = {s}
                for _ in range(self.star_bound):
                    nxt = set().union(*(body[m] for m in frontier)) - seen if frontier else set()
                    if not nxt:
                        break
                    seen |= nxt
                    frontier = nxt
                out[s] = frozenset(seen)
            return out
        if isinstance(alpha, Ode):
            raise OracleError("the enumeration oracle does not support ODEs")
        raise TypeError(f"not a program: {alpha!r}")

    def relation(self, alpha: Program) -> TransitionRelation:
        m = self.succ_map(alpha)
        return TransitionRelation(self.grid, frozenset((s, w) for s in self.states for w in m[s]))

    def holds(self, f: Formula, s: GridState) -> bool:
        """Truth of a possibly modal formula at a grid state."""
        if isinstance(f, (TrueF, FalseF, Cmp)):
            return eval_formula(self.grid.as_dict(s), self.eta, f)
        if isinstance(f, Not):
            return not self.holds(f.arg, s)
        if isinstance(f, And):
            return self.holds(f.left, s) and self.holds(f.right, s)
        if isinstance(f, Or):
            return self.holds(f.left, s) or self.holds(f.right, s)
        if isinstance(f, Implies):
            return (not self.holds(f.left, s)) or self.holds(f.right, s)
        if isinstance(f, Box):
            return all(self.holds(f.post, w) for w in self.succ_map(f.program)[s])
        if isinstance(f, Diamond):
            return any(self.holds(f.post, w) for w in self.succ_map(f.program)[s])
        if isinstance(f, (Forall, Exists)):
            raise UnsupportedConstruct("quantifiers are not supported by the grid oracle")
        raise TypeError(f"not a formula: {f!r}")

    def valid(self, f: Formula) -> bool:
        return all(self.holds(f, s) for s in self.states)

    def satisfying(self, f: Formula) -> set:
        return {s for s in self.states if self.holds(f, s)}


def enumerate_transitions(alpha: Program, grid: Grid, eta: Mapping[str, float] | None = None,
                          star_bound: int = 1000) -> TransitionRelation:
    """Exact transition relation of an ODE-free program on ``grid``."""
    return GridOracle(grid, eta, star_bound).relation(alpha)
