"""Counterexample-guided refinement of LP certificate candidates."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

from ..hp.ast import Const, Formula, Term, TrueF, conj, disj, ge, gt, le, lt
from ..hp.ast import Var
from ..icp.interval import Box
from ..icp.lie import lie_derivative
from ..icp.solver import DEFAULT_DELTA, ResourceLimit, check_formula
from .barrier import DEFAULT_EPS_DEC, DEFAULT_EPS_POS, LPProblem, sample_points
from .certificates import BarrierCertificate
from .cex import counterexample_search

DEFAULT_CAP = 50


@dataclass
class RefineResult:
    status: str  # verified | unverified | infeasible | cap
    certificate: Optional[BarrierCertificate]
    iterations: int
    last_witness: Optional[dict] = None
    log: list[str] = field(default_factory=list)
    problem: Optional[LPProblem] = None

    @property
    def ok(self) -> bool:
        return self.status == "verified"


def outside_core(vars: Sequence[str], radius: float) -> Formula:
    """max_i |x_i| >= radius, or true for a zero radius."""
    if radius <= 0:
        return TrueF()
    parts = []
    for v in vars:
        parts += [ge(Var(v), Const(radius)), le(Var(v), Const(-radius))]
    return disj(*parts)


def _violated(prob: LPProblem, coeffs, point) -> bool:
    for r in prob.rows_at(point, ("probe",)):
        if sum(a * c for a, c in zip(r.coeffs, coeffs)) > r.rhs + 1e-15:
            return True
    return False


def refine_loop(
    traces,
    basis: Sequence[tuple[int, ...]],
    field_: Sequence[tuple[str, Term]],
    domain: Box,
    delta: float = DEFAULT_DELTA,
    vars: Optional[Sequence[str]] = None,
    seed: int = 0,
    margins: tuple[float, float] = (DEFAULT_EPS_POS, DEFAULT_EPS_DEC),
    cap: int = DEFAULT_CAP,
    core_radius: float = 0.0,
    starts: int = 64,
    max_boxes: Optional[int] = None,
    max_points: int = 150,
    eta: Optional[dict] = None,
) -> RefineResult:
    """LP candidate, optimizer refutation, icp validation; repeat up to ``cap``.

    The icp queries are {dV/dt > 0} and {V < 0} over ``domain`` outside
    the cube of half-width ``core_radius``.  A delta-sat witness whose
    midpoint the current candidate already satisfies cannot change the LP,
    so the loop stops there with status ``unverified`` instead of spinning
    to the cap.
    """
    vars = tuple(vars) if vars is not None else tuple(domain.vars)
    prob = LPProblem(vars, tuple(basis), tuple(field_), margins[0], margins[1], "margin", True, dict(eta or {}))
    for p, prov in sample_points(traces, vars, max_points):
        prob.add_point(p, prov)
    log: list[str] = []
    region = outside_core(vars, core_radius)
    witness = None
    cert = None
    for it in range(1, cap + 1):
        cand = prob.solve()
        if not cand.feasible:
            log.append(f"iteration {it}: LP infeasible ({len(prob.rows)} rows)")
            return RefineResult("infeasible", None, it, witness, log, prob)
        cert = cand.certificate(domain=domain, provenance={"seed": seed, "delta": delta})
        found = None
        for kind in ("positivity", "decrease"):
            eps = margins[0] if kind == "positivity" else 0.0
            cex = counterexample_search(cert, field_, domain.project(vars), seed=seed + it,
                                        starts=starts, kind=kind, eps=eps, eta=eta)
            if cex is not None:
                found = (kind, cex)
                break
        if found is not None:
            kind, cex = found
            witness = cex
            prob.add_point(tuple(cex[v] for v in vars), ("cex", it, kind))
            log.append(f"iteration {it}: optimizer refuted {kind} at {_fmt(cex, vars)}")
            continue
        V = cert.value_term()
        vdot = lie_derivative(V, field_)
        queries = (("decrease", conj(gt(vdot, Const(0.0)), region)),
                   ("positivity", conj(lt(V, Const(0.0)), region)))
        refuted = None
        for kind, q in queries:
            try:
                res = check_formula(q, domain, delta, max_boxes)
            except ResourceLimit as e:
                log.append(f"iteration {it}: icp {kind} query hit the box budget")
                cert = BarrierCertificate(cert.vars, cert.basis, cert.coeffs, domain=domain,
                                          provenance=cert.provenance)
                return RefineResult("unverified", cert, it, witness, log, prob)
            if not res.is_unsat:
                refuted = (kind, res.witness.midpoint())
                break
        if refuted is None:
            log.append(f"iteration {it}: icp confirms both conditions")
            cert = BarrierCertificate(cert.vars, cert.basis, cert.coeffs, domain=domain,
                                      verified=True, provenance=cert.provenance)
            return RefineResult("verified", cert, it, witness, log, prob)
        kind, mid = refuted
        point = tuple(mid.get(v, 0.0) for v in vars)
        witness = dict(zip(vars, point))
        log.append(f"iteration {it}: icp {kind} query delta-sat near {_fmt(witness, vars)}")
        if not _violated(prob, cand.coeffs, point):
            log.append("witness midpoint already satisfies the sampled conditions; stopping")
            return RefineResult("unverified", cert, it, witness, log, prob)
        prob.add_point(point, ("icp", it, kind))
    return RefineResult("cap", cert, cap, witness, log, prob)


def _fmt(pt: dict, vars) -> str:
    return "(" + ", ".join(f"{v}={pt[v]:.6g}" for v in vars) + ")"
