import math

import pytest

from ficut.hp.ast import FALSE, TRUE, Const, Havoc, Neg, Ode, Seq, Test as QTest, Var, Cmp
from ficut.hp.evaluate import eval_formula
from ficut.hp.parser import parse_model
from ficut.sim import SimConfig, Trace, integrate_ode, sample_runs, write_trace_csv

DECAY = (("x", Neg(Var("x"))),)


def _endpoint_error(h):
    tr = integrate_ode(DECAY, {"x": 1.0}, TRUE, SimConfig(h=h, t_max=1.0))
    return abs(tr.final["x"] - math.exp(-1.0))


def test_decay_endpoint():
    tr = integrate_ode(DECAY, {"x": 1.0}, TRUE, SimConfig(h=1e-3, t_max=1.0))
    assert tr.t_end == pytest.approx(1.0)
    assert abs(tr.final["x"] - math.exp(-1.0)) < 1e-6


def test_zero_duration_flow():
    tr = integrate_ode(DECAY, {"x": 0.7}, TRUE, SimConfig(t_max=0.0))
    assert len(tr) == 1 and tr.final == {"x": 0.7}


def test_fourth_order_convergence():
    ratio = _endpoint_error(0.1) / _endpoint_error(0.05)
    assert 8.0 <= ratio <= 32.0


def test_domain_exit_stops_flow():
    H = Cmp(">=", Var("x"), Const(0.5))
    tr = integrate_ode(DECAY, {"x": 1.0}, H, SimConfig(h=1e-3, t_max=2.0))
    assert all(s["x"] >= 0.5 for s in tr.states)
    assert tr.events and tr.events[-1][1] == "domain-exit"


def test_initial_state_outside_domain():
    with pytest.raises(ValueError):
        integrate_ode(DECAY, {"x": 0.0}, Cmp(">", Var("x"), Const(1.0)), SimConfig())


def test_abort_gives_no_runs():
    assert len(sample_runs(QTest(FALSE), {"x": 0.0})) == 0


def test_havoc_rejection():
    prog = Seq(Havoc("x"), QTest(Cmp("<", Var("x") ** 2, Const(4.0))))
    cfg = SimConfig(samples=1000, seed=7, ranges={"x": (-3.0, 3.0)})
    runs = sample_runs(prog, {"x": 0.0}, cfg=cfg)
    assert len(runs) > 0
    assert all(abs(t.final["x"]) < 2 for t in runs)


def test_seed_determinism(model_text):
    m = parse_model(model_text("running_example.hp"))
    body = m.formulas["Ex"].right.program
    cfg = SimConfig(seed=5, t_max=0.5, h=1e-2, ranges={"x1": (-2, 2), "x2": (-2, 2)})
    a = sample_runs(body, {"x1": 0.5, "x2": 0.5, "M": 0.0}, cfg=cfg)
    b = sample_runs(body, {"x1": 0.5, "x2": 0.5, "M": 0.0}, cfg=cfg)
    assert a.traces == b.traces


def test_running_example_never_fails(model_text):
    m = parse_model(model_text("running_example.hp"))
    body = m.formulas["Ex"].right.program
    cfg = SimConfig(seed=3, t_max=1.0, h=1e-2, ranges={"x1": (-2, 2), "x2": (-2, 2)})
    for x1, x2 in [(1.0, 0.0), (0.0, 1.0), (-0.6, 0.8)]:
        runs = sample_runs(body, {"x1": x1, "x2": x2, "M": 0.0}, cfg=cfg)
        assert len(runs) > 0
        assert all(s["M"] != 3 for t in runs for s in t.states)


def test_flow_samples_respect_domain():
    H = Cmp("<=", Var("x"), Const(1.5))
    prog = Ode((("x", Const(1.0)),), H)
    runs = sample_runs(prog, {"x": 0.0}, cfg=SimConfig(t_max=3.0, h=1e-2))
    for t in runs:
        assert all(eval_formula(s, {}, H) for s in t.states)


def test_prefixes_are_run_endpoints():
    prog = Ode(DECAY, TRUE)
    runs = sample_runs(prog, {"x": 1.0}, cfg=SimConfig(t_max=1.0, h=0.1, prefixes=0))
    ends = {(t.t_end, t.final["x"]) for t in runs}
    longest = max(runs, key=len)
    for k in range(len(longest)):
        assert (longest.times[k], longest.states[k]["x"]) in ends


def test_trace_rejects_unsorted_times():
    with pytest.raises(ValueError):
        Trace((0.0, 0.0), ({"x": 1.0}, {"x": 1.0}))


def test_trace_csv(tmp_path):
    tr = integrate_ode(DECAY, {"x": 1.0}, TRUE, SimConfig(h=0.5, t_max=1.0))
    out = tmp_path / "t.csv"
    write_trace_csv(tr, out)
    lines = out.read_text().splitlines()
    assert lines[0] == "t,x" and len(lines) == 4
    assert (tmp_path / "t.events.csv").exists()
