"""Counterexample search: seeded multi-start Nelder-Mead over a box."""
from __future__ import annotations

import math
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import minimize
from scipy.stats import qmc

from ..hp.ast import Term
from ..hp.evaluate import DomainError, compile_term
from ..icp.interval import Box
from ..icp.lie import lie_derivative


def _value_term(V) -> Term:
    return V.value_term() if hasattr(V, "value_term") else V


def halton_starts(domain: Box, n: int, seed: int) -> np.ndarray:
    d = len(domain.vars)
    pts = qmc.Halton(d, scramble=True, seed=seed).random(n)
    return qmc.scale(pts, domain.lo, domain.hi) if d else pts


def minimize_over_box(cost, domain: Box, seed: int, starts: int = 64, maxiter: int = 400):
    """Best (value, point) over ``starts`` Nelder-Mead runs; ties keep the lowest start."""
    lo, hi = np.array(domain.lo), np.array(domain.hi)

    def safe(x):
        x = np.clip(x, lo, hi)
        try:
            v = cost(tuple(x))
        except (DomainError, ZeroDivisionError, OverflowError):
            return math.inf
        return v if math.isfinite(v) else math.inf

    best = (math.inf, None)
    d = len(domain.vars)
    for x0 in halton_starts(domain, starts, seed):
        r = minimize(safe, x0, method="Nelder-Mead", bounds=list(zip(lo, hi)),
                     options={"maxiter": maxiter * max(d, 1), "xatol": 1e-10, "fatol": 1e-15})
        x = np.clip(r.x, lo, hi)
        v = safe(x)
        if v < best[0]:
            best = (v, tuple(map(float, x)))
    return best


def counterexample_search(
    V,
    field: Sequence[tuple[str, Term]],
    domain: Box,
    seed: int = 0,
    starts: int = 64,
    kind: str = "decrease",
    eps: float = 0.0,
    eta: Optional[dict] = None,
    tol: float = 1e-12,
) -> Optional[dict]:
    """Point where dV/dt > -eps|x|^2 (or V < eps|x|^2 for ``kind='positivity'``).

    Costs within ``tol`` of zero are treated as rounding noise.
    """
    names = tuple(domain.vars)
    if kind == "decrease":
        target = lie_derivative(_value_term(V), field)
        g = compile_term(target, names, eta)

        def cost(x):
            return -g(x) - eps * sum(v * v for v in x)
    elif kind == "positivity":
        g = compile_term(_value_term(V), names, eta)

        def cost(x):
            return g(x) - eps * sum(v * v for v in x)
    else:
        raise ValueError(f"unknown search kind {kind!r}")
    val, pt = minimize_over_box(cost, domain, seed, starts)
    if pt is None or not val < -tol:
        return None
    return dict(zip(names, pt))
