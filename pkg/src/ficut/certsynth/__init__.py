"""Certificate construction: Lyapunov equations, LP barrier candidates, levels."""
from .barrier import DEFAULT_EPS_DEC, DEFAULT_EPS_POS, LPCandidate, LPProblem, LPRow, lp_candidate, sample_points
from .certificates import (
    BarrierCertificate, CertificateFormatError, NoCertificate, QuadraticCertificate,
    format_certificate, monomial_basis, monomial_term, parse_certificate, read_certificate,
    write_certificate,
)
from .cex import counterexample_search, halton_starts, minimize_over_box
from .levels import (
    LEVEL_GRID, Containment, LevelChecker, LevelResult, ellipsoid_image, select_level,
    sublevel_contained,
)
from .lyapunov import gauss_solve, lyapunov_residual, solve_lyapunov_linear
from .refine import RefineResult, outside_core, refine_loop
