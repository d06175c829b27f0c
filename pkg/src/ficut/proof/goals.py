"""Sequent-style goals and proof-tree nodes."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from ..hp.ast import TRUE, Box, Formula, Implies, Program, TrueF
from ..hp.printer import pretty_print

OPEN, CLOSED, FAILED = "open", "closed", "failed"


@dataclass(frozen=True)
class Goal:
    """``assume -> [program] post``, or ``assume -> post`` without a program."""

    assume: Formula
    program: Optional[Program]
    post: Formula

    @classmethod
    def of(cls, f: Formula) -> "Goal":
        if isinstance(f, Implies) and isinstance(f.right, Box):
            return cls(f.left, f.right.program, f.right.post)
        if isinstance(f, Implies):
            return cls(f.left, None, f.right)
        if isinstance(f, Box):
            return cls(TRUE, f.program, f.post)
        return cls(TRUE, None, f)

    @property
    def conclusion(self) -> Formula:
        return self.post if self.program is None else Box(self.program, self.post)

    def formula(self) -> Formula:
        if isinstance(self.assume, TrueF):
            return self.conclusion
        return Implies(self.assume, self.conclusion)

    def pretty(self) -> str:
        return pretty_print(self.formula())

    def __str__(self) -> str:
        return self.pretty()


@dataclass
class ProofNode:
    goal: Goal
    rule: Optional[str] = None
    args: dict = field(default_factory=dict)
    children: list["ProofNode"] = field(default_factory=list)
    status: str = OPEN
    reason: str = ""
    stats: dict = field(default_factory=dict)
    witness: Optional[dict] = None
    notes: list[str] = field(default_factory=list)

    def expand(self, rule: str, goals, **args) -> list["ProofNode"]:
        self.rule = rule
        self.args = dict(args)
        self.children = [ProofNode(g) for g in goals]
        self.status, self.reason = OPEN, ""
        return self.children

    def close(self, rule: str, reason: str = "", **stats):
        self.rule = self.rule or rule
        self.status, self.reason = CLOSED, reason
        self.stats.update(stats)

    def leave_open(self, reason: str, witness: Optional[dict] = None):
        self.status, self.reason = OPEN, reason
        if witness is not None:
            self.witness = witness

    def fail(self, reason: str, witness: Optional[dict] = None):
        self.status, self.reason = FAILED, reason
        if witness is not None:
            self.witness = witness

    def update(self) -> str:
        """Recompute a rule node's status from its children."""
        if not self.children:
            return self.status
        states = [c.update() for c in self.children]
        if all(s == CLOSED for s in states):
            self.status, self.reason = CLOSED, ""
        elif any(s == FAILED for s in states):
            self.status, self.reason = FAILED, "a premise fails"
        else:
            self.status, self.reason = OPEN, "open premises"
        return self.status

    @property
    def closed(self) -> bool:
        return self.status == CLOSED

    def leaves(self):
        if not self.children:
            yield self
        for c in self.children:
            yield from c.leaves()

    def walk(self):
        yield self
        for c in self.children:
            yield from c.walk()

    def to_json(self) -> dict:
        out = {"goal": self.goal.pretty(), "rule": self.rule, "status": self.status}
        if self.args:
            out["args"] = self.args
        if self.reason:
            out["reason"] = self.reason
        if self.stats:
            out["stats"] = self.stats
        if self.witness is not None:
            out["witness"] = self.witness
        if self.notes:
            out["notes"] = list(self.notes)
        if self.children:
            out["children"] = [c.to_json() for c in self.children]
        return out
