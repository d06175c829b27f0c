"""Proof trees, proof rules and the tactic-driven prover."""
from .arith import ArithChecker, Verdict
from .discharge import Attachment, ProofContext
from .goals import CLOSED, FAILED, OPEN, Goal, ProofNode
from .reach import (
    ModeGraph, ReachEnvelope, UnboundedDerivative, bounded_reach_envelope, discrete_unreachable,
    mode_graph,
)
from .report import report_json, summary_lines, write_report
from .rules import ShapeError, apply_barrier_rule, apply_fwd_inv_cut, apply_invariant_rule
from .tactics import (
    NonlinearMode, ProofResult, TacticError, TacticRunner, linear_matrix, lyap_for_mode, mode_ode,
    parse_tactics, run_proof, synthesize_barrier,
)

__all__ = [
    "ArithChecker", "Attachment", "CLOSED", "FAILED", "Goal", "ModeGraph", "NonlinearMode", "OPEN",
    "ProofContext", "ProofNode", "ProofResult", "ReachEnvelope", "ShapeError", "TacticError",
    "TacticRunner", "UnboundedDerivative", "Verdict", "apply_barrier_rule", "apply_fwd_inv_cut",
    "apply_invariant_rule", "bounded_reach_envelope", "discrete_unreachable", "linear_matrix",
    "lyap_for_mode", "mode_graph", "mode_ode", "parse_tactics", "report_json", "run_proof",
    "summary_lines", "synthesize_barrier", "write_report",
]
