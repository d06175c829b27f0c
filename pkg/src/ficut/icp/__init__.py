"""Interval branch-and-prune decision procedure for nonlinear real constraints."""
from .interval import Box, Interval, interval_eval
from .kernel import BACKEND
from .lie import diff, lie_derivative
from .solver import (
    DEFAULT_BOX_BUDGET, DEFAULT_DELTA, DEFAULT_EPS, Constraint, ConstraintSystem,
    DeltaResult, DeltaSat, QueryDump, ResourceLimit, Unsat, check, check_formula,
    dnf, domain_box, nnf, normalize_atom, weakened_ok,
)
