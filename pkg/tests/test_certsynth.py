import numpy as np
import pytest

from ficut.certsynth import (
    BarrierCertificate, LevelChecker, NoCertificate, QuadraticCertificate, counterexample_search,
    ellipsoid_image, format_certificate, lp_candidate, monomial_basis, parse_certificate,
    refine_loop, select_level, solve_lyapunov_linear, sublevel_contained,
)
from ficut.certsynth.lyapunov import lyapunov_residual
from ficut.hp.ast import Const, Neg, Var
from ficut.hp.evaluate import eval_term
from ficut.hp.parser import SymbolTable, parse_formula, parse_term
from ficut.icp.interval import Box
from ficut.icp.lie import lie_derivative
from ficut.icp.solver import check_formula
from ficut.sim import SimConfig, integrate_ode
from ficut.hp.ast import TRUE

SYM = SymbolTable(state_vars=["x", "x1", "x2"])
A1 = [[-1.0, 4.0], [-0.25, -1.0]]
A2 = [[-1.0, -0.25], [4.0, -1.0]]
DECAY = (("x", Neg(Var("x"))),)
GROWTH = (("x", Var("x")),)


def T(s):
    return parse_term(s, SYM)


def F(s):
    return parse_formula(s, SYM)


# ------------------------------------------------------------------ Lyapunov


def test_minus_identity():
    P = solve_lyapunov_linear(-np.eye(2), np.eye(2)).matrix
    assert np.allclose(P, 0.5 * np.eye(2), atol=1e-15)


@pytest.mark.parametrize("A,want", [
    (A1, [[0.3828, 0.46875], [0.46875, 2.3750]]),
    (A2, [[2.3750, 0.46875], [0.46875, 0.3828]]),
])
def test_switched_system_matrices(A, want):
    c = solve_lyapunov_linear(A, None, ("x1", "x2"))
    assert np.allclose(c.matrix, want, atol=1e-3)
    assert lyapunov_residual(A, c.matrix, np.eye(2)) <= 1e-9


def test_random_stable_matrices():
    rng = np.random.default_rng(0)
    for n in (2, 3, 4) * 34:
        M = rng.normal(size=(n, n))
        A = M - (np.linalg.norm(M, 2) + 1) * np.eye(n)
        c = solve_lyapunov_linear(A)
        assert lyapunov_residual(A, c.matrix, np.eye(n)) <= 1e-9
        assert c.cholesky


def test_unstable_matrix_has_no_certificate():
    with pytest.raises(NoCertificate):
        solve_lyapunov_linear(np.eye(2))


def test_asymmetric_matrix_rejected():
    with pytest.raises(ValueError):
        QuadraticCertificate(((1.0, 0.5), (0.0, 1.0)), ("x1", "x2"))


# ------------------------------------------------------------------- LP side


def _decay_traces():
    return [integrate_ode(DECAY, {"x": 1.0}, TRUE, SimConfig(h=0.02, t_max=1.0))]


def test_lp_one_dimensional_decay():
    cand = lp_candidate(_decay_traces(), [(2,)], DECAY, max_points=50)
    assert cand.feasible
    assert cand.coeffs == (1.0,)


def test_lp_rows_replay():
    cand = lp_candidate(_decay_traces(), [(1,), (2,)], DECAY, max_points=50)
    prob = cand.problem
    assert prob.rows
    for r in prob.rows:
        assert prob.replay(r) == r


def test_lp_origin_only_is_degenerate():
    tr = integrate_ode(DECAY, {"x": 0.0}, TRUE, SimConfig(h=0.1, t_max=0.5))
    cand = lp_candidate([tr], [(2,)], DECAY)
    assert cand.feasible and cand.degenerate


def test_lp_running_example_mode_q1(model_text):
    from ficut.hp.parser import parse_model
    from ficut.hp.ast import program_odes
    m = parse_model(model_text("running_example.hp"))
    ode = program_odes(m.programs["m1"])[0]
    # shifted coordinates y2 = x2 - 2 put the equilibrium at the origin
    field = (("x1", T("-(x2 + 3)*x1")), ("x2", T("x1^2")))
    rng = np.random.default_rng(2)
    traces = []
    for x0 in rng.uniform(-2, 2, size=(6, 2)):
        traces.append(integrate_ode(field, {"x1": x0[0], "x2": x0[1]}, TRUE, SimConfig(h=0.01, t_max=1.0)))
    cand = lp_candidate(traces, monomial_basis(2, 2), field)
    assert cand.feasible
    assert [x for x, _ in ode.eqs] == ["x1", "x2"]


def test_counterexample_found():
    V = T("(x - 1)^2")
    cex = counterexample_search(V, DECAY, Box(("x",), [-2.0], [2.0]), seed=0)
    assert cex is not None
    assert cex["x"] == pytest.approx(0.5, abs=1e-3)
    vdot = eval_term(cex, {}, lie_derivative(V, DECAY))
    assert vdot == pytest.approx(0.5, abs=1e-5)


def test_no_counterexample_for_valid_function():
    assert counterexample_search(T("x^2"), DECAY, Box(("x",), [-2.0], [2.0])) is None


def test_no_counterexample_running_example():
    V1 = T("0.5*x1^2 + 0.5*(x2 - 2)^2")
    field = (("x1", T("-(x2 + 1)*x1")), ("x2", T("x1^2")))
    box = Box(("x1", "x2"), [-10.0, -10.0], [10.0, 10.0])
    assert counterexample_search(V1, field, box, seed=1) is None


def test_refine_decay_first_iteration():
    res = refine_loop(_decay_traces(), [(2,)], DECAY, Box(("x",), [-1.0], [1.0]), 1e-3)
    assert res.status == "verified" and res.iterations == 1
    assert res.certificate.coeffs == (1.0,)


def test_refine_unstable_fails():
    tr = [integrate_ode(GROWTH, {"x": 0.1}, TRUE, SimConfig(h=0.02, t_max=1.0))]
    res = refine_loop(tr, [(2,)], GROWTH, Box(("x",), [-1.0], [1.0]), 1e-3)
    assert not res.ok
    assert res.certificate is None or not res.certificate.verified


def test_refine_switched_mode_one():
    field = (("x1", T("-x1 + 4*x2")), ("x2", T("-0.25*x1 - x2")))
    rng = np.random.default_rng(3)
    traces = [integrate_ode(field, {"x1": a, "x2": b}, TRUE, SimConfig(h=0.01, t_max=2.0))
              for a, b in rng.uniform(-1, 1, size=(6, 2))]
    box = Box(("x1", "x2"), [-1.0, -1.0], [1.0, 1.0])
    res = refine_loop(traces, monomial_basis(2, 2), field, box, 1e-3, core_radius=0.05)
    assert res.ok
    c = res.certificate
    # the loop's exit condition, checked again independently
    vdot = lie_derivative(c.value_term(), field)
    q = F(f"({vdot_text(vdot)}) > 0 & (x1 >= 0.05 | x1 <= -0.05 | x2 >= 0.05 | x2 <= -0.05)")
    assert check_formula(q, box, 1e-3).is_unsat
    # quadratic part is a Lyapunov matrix for A1
    P = np.zeros((2, 2))
    for m, k in zip(c.basis, c.coeffs):
        if m == (2, 0):
            P[0, 0] = k
        elif m == (0, 2):
            P[1, 1] = k
        elif m == (1, 1):
            P[0, 1] = P[1, 0] = k / 2
    A = np.array(A1)
    assert np.all(np.linalg.eigvalsh(A.T @ P + P @ A) < 0)


def vdot_text(t):
    from ficut.hp.printer import pretty_print
    return pretty_print(t)


# ------------------------------------------------------------------- levels


RUNNING_BOX = Box(("x1", "x2"), [-20.0, -20.0], [20.0, 20.0])


def test_level_first_cut_accepts_five():
    V1 = T("0.5*x1^2 + 0.5*(x2 - 2)^2")
    contain = F("x1^2 + x2^2 < 1")
    exclude = F("x1 < -10 | x1 > 10 | x2 < -10 | x2 > 10")
    res = select_level(V1, contain, exclude, RUNNING_BOX, 1e-3)
    assert res.ok
    assert res.lower <= 5.0 <= res.upper
    ck = LevelChecker(V1, contain, exclude, RUNNING_BOX, 1e-3)
    assert ck.passes(5.0)


def test_level_second_cut_accepts_sixteen():
    V2 = T("2*x1^2 + 4*x2^2")
    contain = F("x1^2 + x2^2 < 4")
    exclude = F("x1 < -10 | x1 > 10 | x2 < -10 | x2 > 10")
    res = select_level(V2, contain, exclude, RUNNING_BOX, 1e-3)
    assert res.ok
    # 16 is the exact tangency level; bisection lands within its refinement step above it
    assert 16.0 <= res.lower <= 16.0 * (1 + 2e-3) and res.upper > 16.0
    assert LevelChecker(V2, contain, exclude, RUNNING_BOX, 1e-3).passes(16.0)


def test_level_inseparable():
    V = T("x1^2 + x2^2")
    pt = F("x1 = 1 & x2 = 1")
    assert not select_level(V, pt, pt, RUNNING_BOX, 1e-3).ok


def test_level_window_is_consistent():
    V2 = T("2*x1^2 + 4*x2^2")
    contain = F("x1^2 + x2^2 < 4")
    exclude = F("x1 < -10 | x1 > 10 | x2 < -10 | x2 > 10")
    res = select_level(V2, contain, exclude, RUNNING_BOX, 1e-3)
    ck = LevelChecker(V2, contain, exclude, RUNNING_BOX, 1e-3)
    for lv in np.linspace(res.lower, res.upper, 7):
        assert ck.passes(float(lv))


# ---------------------------------------------------------- ellipsoid images


def _quad(P, level, vars=("x1", "x2")):
    return QuadraticCertificate(tuple(map(tuple, np.asarray(P, float))), vars, level)


def test_identity_reset_image():
    c = _quad([[2.0, 0.5], [0.5, 1.0]], 1.0)
    assert np.allclose(ellipsoid_image(c, None, np.eye(2)).matrix, c.matrix)


def test_scaling_reset_image():
    img = ellipsoid_image(np.eye(2), 1.0, 2 * np.eye(2), ("x1", "x2"))
    assert np.allclose(img.matrix, 0.25 * np.eye(2))


def test_image_exactness():
    P = solve_lyapunov_linear(A1, None, ("x1", "x2")).with_level(1.0)
    R = np.array([[-0.0658, -0.0123], [0.1965, -0.0658]])
    img = ellipsoid_image(P, None, R)
    rng = np.random.default_rng(5)
    L = np.linalg.cholesky(P.matrix)
    for _ in range(1000):
        u = rng.normal(size=2)
        u *= rng.uniform() / np.linalg.norm(u)
        x = np.linalg.solve(L.T, u)  # x^T P x = |u|^2 <= 1
        y = R @ x
        assert img.value(y) <= 1.0 * (1 + 1e-9)


def test_singular_reset_rejected():
    with pytest.raises(NoCertificate):
        ellipsoid_image(np.eye(2), 1.0, [[1.0, 2.0], [2.0, 4.0]], ("x1", "x2"))


def test_containment_reflexive():
    c = _quad([[2.375, 0.46875], [0.46875, 0.3828125]], 1.0)
    assert sublevel_contained(c, c, Box(("x1", "x2"), [-3, -3], [3, 3]), 1e-4)


def test_containment_strict_superset():
    inner = _quad([[1.0]], 1.0, ("x",))
    outer = _quad([[1.0]], 0.25, ("x",))
    res = sublevel_contained(inner, outer, Box(("x",), [-3], [3]), 1e-3)
    assert not res.contained
    lo, hi = res.witness["x"]
    assert 0.5 <= abs(0.5 * (lo + hi)) <= 1.0 + 1e-3


# --------------------------------------------------------- certificate files


def test_certificate_text_round_trip():
    b = BarrierCertificate(("x1", "x2"), ((2, 0), (1, 1), (0, 2)), (0.5, -0.25, 1.0), level=3.0,
                           guard=F("x1 >= 0"), provenance={"mode": "m1", "seed": 4})
    back = parse_certificate(format_certificate(b), SYM)
    assert back == b
    q = _quad([[2.0, 0.0], [0.0, 4.0]], 16.0)
    assert parse_certificate(format_certificate(q), SYM) == q


def test_barrier_rejects_duplicate_monomials():
    with pytest.raises(ValueError):
        BarrierCertificate(("x",), ((2,), (2,)), (1.0, 1.0))
