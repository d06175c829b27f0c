"""Boxes and the natural interval extension of terms.

Every arithmetic operation widens its result by a relative slack of 1e-12
on each bound.  That covers round-to-nearest errors of the float
operations without switching the FPU rounding mode.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

from ..hp.ast import (
    Add, Const, Div, LVar, Mul, Neg, Pow, Sqrt, Sub, Term, Var,
)

REL_SLACK = 1e-12
INF = math.inf


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo <= self.hi:
            raise ValueError(f"empty interval [{self.lo}, {self.hi}]")

    @property
    def width(self) -> float:
        return self.hi - self.lo

    def contains(self, v: float) -> bool:
        return self.lo <= v <= self.hi

    def __iter__(self):
        return iter((self.lo, self.hi))


WHOLE = Interval(-INF, INF)


def widen(lo: float, hi: float) -> Interval:
    if math.isnan(lo) or math.isnan(hi):
        return WHOLE
    return Interval(lo - abs(lo) * REL_SLACK, hi + abs(hi) * REL_SLACK)


def _mul0(a: float, b: float) -> float:
    # 0 * inf is 0 for enclosures: the zero factor is exact
    if a == 0.0 or b == 0.0:
        return 0.0
    return a * b


def i_add(a: Interval, b: Interval) -> Interval:
    return widen(a.lo + b.lo, a.hi + b.hi)


def i_sub(a: Interval, b: Interval) -> Interval:
    return widen(a.lo - b.hi, a.hi - b.lo)


def i_neg(a: Interval) -> Interval:
    return Interval(-a.hi, -a.lo)


def i_mul(a: Interval, b: Interval) -> Interval:
    ps = (_mul0(a.lo, b.lo), _mul0(a.lo, b.hi), _mul0(a.hi, b.lo), _mul0(a.hi, b.hi))
    return widen(min(ps), max(ps))


def i_div(a: Interval, b: Interval) -> Interval:
    if b.lo <= 0.0 <= b.hi:
        return WHOLE
    r = widen(1.0 / b.hi, 1.0 / b.lo)
    return i_mul(a, r)


def i_pow(a: Interval, n: int) -> Interval:
    if n == 0:
        return Interval(1.0, 1.0)
    if n == 1:
        return a
    lo_n, hi_n = a.lo ** n, a.hi ** n
    if n % 2 == 1:
        return widen(lo_n, hi_n)
    if a.lo >= 0.0:
        return widen(lo_n, hi_n)
    if a.hi <= 0.0:
        return widen(hi_n, lo_n)
    return widen(0.0, max(lo_n, hi_n))


def i_sqrt(a: Interval) -> Interval:
    if a.lo < 0.0:
        # undefined on part of the argument: keep only the range of sqrt
        return Interval(0.0, INF)
    return widen(math.sqrt(a.lo), math.sqrt(a.hi))


@dataclass(frozen=True)
class Box:
    """Axis-aligned box over an ordered variable tuple."""

    vars: tuple[str, ...]
    lo: tuple[float, ...]
    hi: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "vars", tuple(self.vars))
        object.__setattr__(self, "lo", tuple(float(v) for v in self.lo))
        object.__setattr__(self, "hi", tuple(float(v) for v in self.hi))
        if not (len(self.vars) == len(self.lo) == len(self.hi)):
            raise ValueError("box arity mismatch")
        for n, a, b in zip(self.vars, self.lo, self.hi):
            if not a <= b:
                raise ValueError(f"empty box axis {n}: [{a}, {b}]")

    @classmethod
    def from_dict(cls, d: Mapping[str, tuple[float, float]]) -> "Box":
        names = tuple(d)
        return cls(names, tuple(d[n][0] for n in names), tuple(d[n][1] for n in names))

    def as_dict(self) -> dict[str, tuple[float, float]]:
        return {n: (a, b) for n, a, b in zip(self.vars, self.lo, self.hi)}

    def interval(self, name: str) -> Interval:
        i = self.vars.index(name)
        return Interval(self.lo[i], self.hi[i])

    @property
    def width(self) -> float:
        return max((b - a for a, b in zip(self.lo, self.hi)), default=0.0)

    def midpoint(self) -> dict[str, float]:
        return {n: 0.5 * (a + b) for n, a, b in zip(self.vars, self.lo, self.hi)}

    def contains(self, point: Mapping[str, float]) -> bool:
        return all(a <= point[n] <= b for n, a, b in zip(self.vars, self.lo, self.hi))

    def split(self) -> tuple["Box", "Box"]:
        """Bisect the widest axis (first one on ties)."""
        k = max(range(len(self.vars)), key=lambda i: (self.hi[i] - self.lo[i], -i))
        mid = 0.5 * (self.lo[k] + self.hi[k])
        hi1 = self.hi[:k] + (mid,) + self.hi[k + 1:]
        lo2 = self.lo[:k] + (mid,) + self.lo[k + 1:]
        return Box(self.vars, self.lo, hi1), Box(self.vars, lo2, self.hi)

    def project(self, names) -> "Box":
        """Sub-box over ``names`` (kept in this box's axis order)."""
        keep = [i for i, n in enumerate(self.vars) if n in set(names)]
        return Box(tuple(self.vars[i] for i in keep), tuple(self.lo[i] for i in keep),
                   tuple(self.hi[i] for i in keep))

    def to_json(self) -> dict:
        return {n: [a, b] for n, a, b in zip(self.vars, self.lo, self.hi)}


def interval_eval(t: Term, box: Box | Mapping[str, tuple[float, float]]) -> Interval:
    """Enclosure of the range of ``t`` over ``box`` (state and logical names)."""
    env = box.as_dict() if isinstance(box, Box) else box

    def go(t: Term) -> Interval:
        if isinstance(t, Const):
            return Interval(t.value, t.value)
        if isinstance(t, (Var, LVar)):
            lo, hi = env[t.name]
            return Interval(lo, hi)
        if isinstance(t, Neg):
            return i_neg(go(t.arg))
        if isinstance(t, Pow):
            return i_pow(go(t.base), t.exp)
        if isinstance(t, Sqrt):
            return i_sqrt(go(t.arg))
        a, b = go(t.left), go(t.right)
        if isinstance(t, Add):
            return i_add(a, b)
        if isinstance(t, Sub):
            return i_sub(a, b)
        if isinstance(t, Mul):
            return i_mul(a, b)
        if isinstance(t, Div):
            return i_div(a, b)
        raise TypeError(f"not a term: {t!r}")

    return go(t)
