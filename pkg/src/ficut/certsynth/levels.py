"""Level selection, ellipsoid images and sublevel-set containment."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from ..hp.ast import Const, Formula, conj, gt, le
from ..icp.interval import Box, interval_eval
from ..icp.solver import DEFAULT_DELTA, ResourceLimit, check_formula
from .certificates import NoCertificate, QuadraticCertificate

LEVEL_GRID = 1e-3  # relative resolution of the level search


@dataclass
class LevelResult:
    ok: bool
    level: Optional[float]
    lower: Optional[float] = None  # smallest grid level that contains
    upper: Optional[float] = None  # largest grid level that excludes
    witnesses: dict = field(default_factory=dict)
    queries: int = 0

    def __bool__(self):
        return self.ok


def _value(V):
    return V.value_term() if hasattr(V, "value_term") else V


class LevelChecker:
    """The two monotone level tests of ``select_level``."""

    def __init__(self, V, must_contain: Optional[Formula], must_exclude: Optional[Formula],
                 domain: Box, delta: float, max_boxes: Optional[int] = None):
        self.v = _value(V)
        self.contain = must_contain
        self.exclude = must_exclude
        self.domain = domain
        self.delta = delta
        self.max_boxes = max_boxes
        self.queries = 0
        self.witnesses: dict = {}

    def _unsat(self, f: Formula, key: str) -> bool:
        self.queries += 1
        try:
            res = check_formula(f, self.domain, self.delta, self.max_boxes)
        except ResourceLimit:
            return False
        if not res.is_unsat:
            self.witnesses[key] = res.witness.to_json()
        return res.is_unsat

    def contains(self, level: float) -> bool:
        """{must_contain and V > level} is unsat."""
        if self.contain is None:
            return True
        return self._unsat(conj(self.contain, gt(self.v, Const(level))), "contain")

    def excludes(self, level: float) -> bool:
        """{must_exclude and V <= level} is unsat."""
        if self.exclude is None:
            return True
        return self._unsat(conj(self.exclude, le(self.v, Const(level))), "exclude")

    def passes(self, level: float) -> bool:
        return self.contains(level) and self.excludes(level)


def _bisect(test, lo: float, hi: float, step: float, want_low: bool) -> float:
    """Grid-resolution boundary of a monotone predicate.

    With ``want_low`` the predicate is false at ``lo``, true at ``hi``, and
    the smallest passing grid level is returned; otherwise true at ``lo``,
    false at ``hi``, and the largest passing level is returned.
    """
    a, b = 0, int(round((hi - lo) / step))
    while b - a > 1:
        m = (a + b) // 2
        ok = test(lo + m * step)
        if ok == want_low:
            b = m
        else:
            a = m
    return lo + (b if want_low else a) * step


def _boundary(test, lo: float, hi: float, step: float, want_low: bool) -> float:
    """``_bisect`` on a coarse grid, then once more at 1e-3 of the result."""
    x = _bisect(test, lo, hi, step, want_low)
    fine = LEVEL_GRID * abs(x)
    if fine <= 0.0 or fine >= step:
        return x
    if want_low:
        return _bisect(test, x - step, x, fine, True)
    return _bisect(test, x, x + step, fine, False)


def select_level(
    V,
    must_contain: Optional[Formula],
    must_exclude: Optional[Formula],
    domain: Box,
    delta: float = DEFAULT_DELTA,
    max_boxes: Optional[int] = None,
    prefer: str = "low",
) -> LevelResult:
    """Bisect for a level separating ``must_contain`` from ``must_exclude``.

    Levels are first bisected on the grid {k * 1e-3 * l_hi} with l_hi the
    interval upper bound of V over the domain, then refined to 1e-3 of the
    level found.  ``prefer='low'`` returns the smallest
    containing level, ``'high'`` the largest excluding one.
    """
    ck = LevelChecker(V, must_contain, must_exclude, domain, delta, max_boxes)
    l_hi = interval_eval(ck.v, domain).hi
    if not np.isfinite(l_hi) or l_hi <= 0:
        return LevelResult(False, None, witnesses={"reason": "V has no finite positive bound on the domain"})
    step = LEVEL_GRID * l_hi
    if ck.contains(0.0):
        lower = 0.0
    elif ck.contains(l_hi):
        lower = _boundary(ck.contains, 0.0, l_hi, step, want_low=True)
    else:
        return LevelResult(False, None, witnesses=dict(ck.witnesses), queries=ck.queries)
    if not ck.excludes(lower):
        return LevelResult(False, None, lower, None, dict(ck.witnesses), ck.queries)
    if ck.excludes(l_hi):
        upper = l_hi
    else:
        upper = _boundary(ck.excludes, lower, l_hi, step, want_low=False)
    level = lower if prefer == "low" else upper
    return LevelResult(True, level, lower, upper, {}, ck.queries)


def ellipsoid_image(P, level: Optional[float], R, vars: Optional[Sequence[str]] = None,
                    guard=None) -> QuadraticCertificate:
    """Image of {x | xᵀPx <= level} under x -> Rx, as {y | yᵀP'y <= level}."""
    if isinstance(P, QuadraticCertificate):
        vars = vars or P.vars
        level = P.level if level is None else level
        guard = guard if guard is not None else P.guard
        P = P.matrix
    P = np.asarray(P, dtype=float)
    R = np.asarray(R, dtype=float)
    if abs(np.linalg.det(R)) <= 1e-12:
        raise NoCertificate("singular reset matrix")
    Ri = np.linalg.inv(R)
    Pn = Ri.T @ P @ Ri
    Pn = 0.5 * (Pn + Pn.T)
    vars = tuple(vars) if vars else tuple(f"x{i + 1}" for i in range(P.shape[0]))
    return QuadraticCertificate(tuple(map(tuple, Pn)), vars, level, guard,
                                provenance={"image_of": "reset"})


@dataclass
class Containment:
    contained: bool
    witness: Optional[dict] = None
    stats: dict = field(default_factory=dict)

    def __bool__(self):
        return self.contained


def sublevel_contained(inner: QuadraticCertificate, outer: QuadraticCertificate, domain: Box,
                       delta: float = DEFAULT_DELTA, max_boxes: Optional[int] = None) -> Containment:
    """Decide {x | V_in <= l_in} within {x | V_out <= l_out} by an icp query."""
    if tuple(inner.vars) != tuple(outer.vars):
        raise ValueError("certificates range over different variables")
    q = conj(inner.sublevel_formula(), gt(outer.value_term(), Const(outer.level)))
    try:
        res = check_formula(q, domain, delta, max_boxes)
    except ResourceLimit as e:
        return Containment(False, None, {"reason": str(e), **e.stats})
    if res.is_unsat:
        return Containment(True, None, res.stats)
    return Containment(False, res.witness.to_json(), res.stats)
