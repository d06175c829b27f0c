"""Numerical execution of hybrid programs.

ODEs are integrated with fixed-step RK4.  Nondeterminism is explored by
sampling: havoc draws seeded uniform values, choice follows both branches,
and star unrolls up to a bound with a per-iteration branch budget.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np

from .hp.ast import (
    Assign, Choice, Formula, Havoc, Ode, Program, Seq, Star, Term, Test,
)
from .hp.evaluate import DomainError, compile_term, eval_formula, eval_term

EVENT_KINDS = ("mode-switch", "domain-exit", "test-fail", "havoc-sample")


@dataclass(frozen=True)
class SimConfig:
    h: float = 1e-3
    t_max: float = 1.0
    samples: int = 4
    ranges: Mapping[str, tuple[float, float]] = field(default_factory=dict)
    choice_budget: int = 16
    star_bound: int = 4
    seed: int = 0
    prefixes: int = 4  # intermediate flow endpoints per ODE; 0 emits every sample
    mode_vars: tuple[str, ...] = ("M",)

    def __post_init__(self):
        if not self.h > 0:
            raise ValueError("step h must be positive")
        if self.t_max < 0:
            raise ValueError("t_max must be nonnegative")
        for name in ("samples", "choice_budget", "star_bound"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be at least 1")


@dataclass(frozen=True)
class Trace:
    times: tuple[float, ...]
    states: tuple[dict, ...]
    events: tuple[tuple[float, str, str], ...] = ()

    def __post_init__(self):
        if len(self.times) != len(self.states) or not self.times:
            raise ValueError("a trace needs matching, nonempty time and state lists")
        if any(b <= a for a, b in zip(self.times, self.times[1:])):
            raise ValueError("trace times must be strictly increasing")

    @property
    def final(self) -> dict:
        return self.states[-1]

    @property
    def t_end(self) -> float:
        return self.times[-1]

    def __len__(self) -> int:
        return len(self.times)

    def key(self) -> tuple:
        return (self.times, tuple(tuple(sorted(s.items())) for s in self.states), self.events)

    def __eq__(self, other):
        return isinstance(other, Trace) and self.key() == other.key()

    def __hash__(self):
        return hash(self.key())

    def replace_last(self, state: dict, event=None) -> "Trace":
        ev = self.events + ((event,) if event else ())
        return Trace(self.times, self.states[:-1] + (state,), ev)

    def extend(self, times: Sequence[float], states: Sequence[dict], events=()) -> "Trace":
        return Trace(self.times + tuple(times), self.states + tuple(states), self.events + tuple(events))


@dataclass
class RunSet:
    traces: list[Trace]
    warnings: list[str] = field(default_factory=list)
    rejected: list[tuple[float, str, str]] = field(default_factory=list)

    def __iter__(self):
        return iter(self.traces)

    def __len__(self):
        return len(self.traces)


def _steps(t_max: float, h: float) -> int:
    return int(math.floor(t_max / h + 1e-9))


def integrate_ode(
    field_: Sequence[tuple[str, Term]],
    x0: Mapping[str, float],
    H: Formula,
    cfg: SimConfig,
    eta: Optional[Mapping[str, float]] = None,
    t0: float = 0.0,
) -> Trace:
    """RK4 from ``x0`` until H fails at a sample or ``cfg.t_max`` elapses."""
    eta = dict(eta or {})
    if not eval_formula(x0, eta, H):
        raise ValueError("initial state violates the evolution domain")
    names = tuple(sorted(x0))
    odevars = [x for x, _ in field_]
    idx = [names.index(x) for x in odevars]
    rhs = [compile_term(t, names, eta) for _, t in field_]
    h = cfg.h

    def f(vec):
        return np.array([g(vec) for g in rhs])

    cur = np.array([float(x0[n]) for n in names])
    times, states, events = [t0], [dict(x0)], []
    for k in range(1, _steps(cfg.t_max, h) + 1):
        y = cur[idx]

        def at(dy):
            v = cur.copy()
            v[idx] = y + dy
            return tuple(v)

        k1 = f(tuple(cur))
        k2 = f(at(0.5 * h * k1))
        k3 = f(at(0.5 * h * k2))
        k4 = f(at(h * k3))
        nxt = cur.copy()
        nxt[idx] = y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        state = dict(zip(names, map(float, nxt)))
        t = t0 + k * h
        try:
            inside = eval_formula(state, eta, H)
        except DomainError:
            inside = False
        if not inside:
            events.append((t, "domain-exit", "evolution domain violated"))
            break
        cur = nxt
        times.append(t)
        states.append(state)
    return Trace(tuple(times), tuple(states), tuple(events))


class _Explorer:
    def __init__(self, eta, cfg: SimConfig):
        self.eta = dict(eta or {})
        self.cfg = cfg
        self.rng = np.random.default_rng(cfg.seed)
        self.warnings: list[str] = []
        self.rejected: list = []

    def run(self, a: Program, tr: Trace) -> list[Trace]:
        cfg = self.cfg
        if isinstance(a, Assign):
            s = dict(tr.final)
            s[a.var] = eval_term(s, self.eta, a.term)
            ev = None
            if a.var in cfg.mode_vars and s[a.var] != tr.final.get(a.var):
                ev = (tr.t_end, "mode-switch", f"{a.var}={s[a.var]:g}")
            return [tr.replace_last(s, ev)]
        if isinstance(a, Havoc):
            if a.var not in cfg.ranges:
                raise ValueError(f"no havoc range configured for {a.var}")
            lo, hi = cfg.ranges[a.var]
            out = []
            for v in self.rng.uniform(lo, hi, cfg.samples):
                s = dict(tr.final)
                s[a.var] = float(v)
                out.append(tr.replace_last(s, (tr.t_end, "havoc-sample", f"{a.var}={v:.6g}")))
            return out
        if isinstance(a, Test):
            try:
                ok = eval_formula(tr.final, self.eta, a.cond)
            except DomainError:
                ok = False
            if not ok:
                self.rejected.append((tr.t_end, "test-fail", "test rejected"))
                return []
            return [tr]
        if isinstance(a, Ode):
            try:
                if not eval_formula(tr.final, self.eta, a.domain):
                    self.rejected.append((tr.t_end, "domain-exit", "flow starts outside domain"))
                    return []
            except DomainError:
                return []
            flow = integrate_ode(a.eqs, tr.final, a.domain, cfg, self.eta, t0=tr.t_end)
            n = len(flow)
            if n == 1:
                return [tr]
            if cfg.prefixes == 0:
                cuts = range(1, n)
            else:
                cuts = sorted({max(1, round(j * (n - 1) / (cfg.prefixes + 1))) for j in range(1, cfg.prefixes + 2)})
            out = [tr]
            for c in cuts:
                evs = flow.events if c == n - 1 else ()
                out.append(tr.extend(flow.times[1:c + 1], flow.states[1:c + 1], evs))
            return out
        if isinstance(a, Choice):
            return self.run(a.left, tr) + self.run(a.right, tr)
        if isinstance(a, Seq):
            out = []
            for t1 in self.run(a.left, tr):
                out.extend(self.run(a.right, t1))
            return out
        if isinstance(a, Star):
            results = [tr]
            frontier = [tr]
            for _ in range(cfg.star_bound):
                nxt = []
                for t1 in frontier:
                    nxt.extend(self.run(a.body, t1))
                if len(nxt) > cfg.choice_budget:
                    keep = sorted(self.rng.choice(len(nxt), cfg.choice_budget, replace=False))
                    nxt = [nxt[k] for k in keep]
                    self.warnings.append("budget exhausted: star frontier subsampled")
                if not nxt:
                    break
                results.extend(nxt)
                frontier = nxt
            return results
        raise TypeError(f"not a program: {a!r}")


def sample_runs(alpha: Program, x0: Mapping[str, float], eta=None, cfg: SimConfig = SimConfig()) -> RunSet:
    """Sampled runs of ``alpha`` from ``x0``; each returned trace is one run."""
    ex = _Explorer(eta, cfg)
    start = Trace((0.0,), (dict(x0),))
    traces = ex.run(alpha, start)
    seen, uniq = set(), []
    for t in traces:
        k = t.key()
        if k not in seen:
            seen.add(k)
            uniq.append(t)
    warnings = sorted(set(ex.warnings))
    return RunSet(uniq, warnings, ex.rejected)


def write_trace_csv(trace: Trace, path: str | Path, variables: Optional[Sequence[str]] = None) -> None:
    """Samples to ``path`` and events to the ``.events.csv`` sidecar."""
    path = Path(path)
    names = list(variables) if variables else sorted(trace.states[0])
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", *names])
        for t, s in zip(trace.times, trace.states):
            w.writerow([repr(t), *(repr(float(s[n])) for n in names)])
    side = path.with_suffix(".events.csv")
    with side.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "kind", "detail"])
        for t, kind, detail in trace.events:
            w.writerow([repr(t), kind, detail])
