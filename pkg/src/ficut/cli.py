"""Command-line entry point: ``ficut prove | synth | simulate``.

Exit codes: 0 success (goal closed, certificate written, trace written),
2 proof left open, 1 for malformed input or any other error.
"""
from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

from .certsynth.certificates import write_certificate
from .hp.ast import Box as BoxF, Formula, Implies, Program
from .hp.parser import Model, ParseError, parse_model
from .icp.solver import DEFAULT_DELTA, DEFAULT_EPS, QueryDump
from .proof.report import summary_lines, write_report
from .proof.tactics import NonlinearMode, TacticError, lyap_for_mode, run_proof, synthesize_barrier
from .sim import SimConfig, sample_runs

log = logging.getLogger("ficut")

EXIT_OK, EXIT_ERROR, EXIT_OPEN = 0, 1, 2


class UsageError(Exception):
    pass


def _positive(text: str) -> float:
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text}")
    return v


def load_model(path) -> Model:
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"no such model file: {p}")
    try:
        return parse_model(p.read_text())
    except ParseError as e:
        raise UsageError(f"{p}:{e}") from e


# ------------------------------------------------------------------ prove


def cmd_prove(args) -> int:
    model = load_model(args.model)
    tpath = Path(args.tactics)
    if not tpath.is_file():
        raise UsageError(f"no such tactic file: {tpath}")
    dump = QueryDump(args.dump_queries) if args.dump_queries else None
    try:
        if dump:
            with dump:
                res = run_proof(model, tpath.read_text(), args.delta, args.eps, args.box_budget, tpath.parent)
        else:
            res = run_proof(model, tpath.read_text(), args.delta, args.eps, args.box_budget, tpath.parent)
    except TacticError as e:
        where = f"{tpath}:{e.line}: " if e.line else f"{tpath}: "
        raise UsageError(where + str(e)) from e
    except ParseError as e:
        raise UsageError(f"{tpath}:{e}") from e
    if args.report:
        write_report(res.report, args.report, model=Path(args.model).name,
                     tactics=tpath.name)
    for line in summary_lines(res.report):
        print(line)
    if dump:
        print(f"wrote {dump.count} queries to {dump.dir}")
    return EXIT_OK if res.closed else EXIT_OPEN


# ------------------------------------------------------------------ synth


def cmd_synth(args) -> int:
    model = load_model(args.model)
    try:
        if args.method == "lyap-linear":
            cert = lyap_for_mode(model, args.mode, level=args.level)
            print(f"lyapunov residual {cert.provenance.get('residual', 0.0):.3g}")
            verdict = "solved"
        else:
            res, _, _ = synthesize_barrier(model, args.mode, degree=args.degree, seed=args.seed,
                                           delta=args.delta, max_boxes=args.box_budget)
            for line in res.log:
                log.info(line)
            if res.certificate is None:
                print(f"barrier synthesis failed: {res.status} after {res.iterations} iterations",
                      file=sys.stderr)
                if res.last_witness:
                    print(f"last counterexample {res.last_witness}", file=sys.stderr)
                return EXIT_ERROR
            cert = res.certificate
            verdict = res.status
    except NonlinearMode as e:
        raise UsageError(f"{args.mode}: {e}") from e
    except TacticError as e:
        raise UsageError(str(e)) from e
    write_certificate(cert, args.output)
    print(f"{args.method} certificate for {args.mode}: {verdict}; wrote {args.output}")
    return EXIT_OK


# ------------------------------------------------------------------ simulate


def _find_box(f: Formula):
    if isinstance(f, BoxF):
        return f.program
    if isinstance(f, Implies):
        return _find_box(f.right)
    return None


def resolve_program(model: Model, name: str) -> Program:
    """A named program, or the body of the box modality in a named formula."""
    if name in model.programs:
        return model.programs[name]
    if name in model.formulas:
        p = _find_box(model.formulas[name])
        if p is not None:
            return p
    avail = sorted(model.programs) + sorted(n for n, f in model.formulas.items() if _find_box(f))
    raise UsageError(f"unknown program {name!r}; available: {', '.join(avail)}")


def parse_init(text: str, model: Model) -> tuple[dict, dict]:
    sym = model.symbols
    state, eta = {}, {}
    for item in filter(None, (s.strip() for s in text.split(","))):
        if "=" not in item:
            raise UsageError(f"bad initial assignment {item!r}, expected name=value")
        k, v = (s.strip() for s in item.split("=", 1))
        mv = sym.modes.get(k, {}).get(v)
        try:
            val = float(mv) if mv is not None else float(v)
        except ValueError:
            raise UsageError(f"bad value for {k}: {v!r}") from None
        if k in sym.state_vars:
            state[k] = val
        elif k in sym.logical_vars:
            eta[k] = val
        else:
            raise UsageError(f"{k} is not a declared variable")
    missing = [n for n in sym.state_vars if n not in state]
    if missing:
        raise UsageError(f"no initial value for {', '.join(missing)}")
    return state, eta


def write_runs_csv(runs, path, names) -> None:
    """All runs in one file, told apart by the leading ``run`` column."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["run", "t", *names])
        for i, tr in enumerate(runs):
            for t, s in zip(tr.times, tr.states):
                w.writerow([i, repr(t), *(repr(float(s[n])) for n in names)])
    with path.with_suffix(".events.csv").open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["run", "t", "kind", "detail"])
        for i, tr in enumerate(runs):
            for t, kind, detail in tr.events:
                w.writerow([i, repr(t), kind, detail])


def cmd_simulate(args) -> int:
    model = load_model(args.model)
    prog = resolve_program(model, args.program)
    x0, eta = parse_init(args.init, model)
    cfg = SimConfig(h=args.h, t_max=args.t_max, samples=args.samples, seed=args.seed,
                    star_bound=args.star_bound, ranges=dict(model.domain),
                    mode_vars=tuple(model.symbols.modes))
    try:
        runs = sample_runs(prog, x0, eta, cfg)
    except ValueError as e:
        raise UsageError(str(e)) from e
    for wmsg in runs.warnings:
        log.warning(wmsg)
    write_runs_csv(runs.traces, args.output, list(model.symbols.state_vars))
    print(f"{len(runs)} runs, {sum(len(t) for t in runs)} rows; wrote {args.output}")
    return EXIT_OK


# ------------------------------------------------------------------ main


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ficut", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="count", default=0)
    ap.add_argument("--box-budget", type=int, default=None,
                    help="icp box budget (default: FICUT_BOX_BUDGET or 1e6)")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prove", help="run a tactic file against a model")
    p.add_argument("model")
    p.add_argument("tactics")
    p.add_argument("--delta", type=_positive, default=DEFAULT_DELTA)
    p.add_argument("--eps", type=_positive, default=DEFAULT_EPS)
    p.add_argument("--report", help="write the JSON report here")
    p.add_argument("--dump-queries", metavar="DIR", help="write every icp query to DIR")
    p.set_defaults(func=cmd_prove)

    s = sub.add_parser("synth", help="synthesize a certificate for one mode")
    s.add_argument("model")
    s.add_argument("--mode", required=True)
    s.add_argument("--method", choices=("lyap-linear", "barrier-lp"), required=True)
    s.add_argument("--degree", type=int, default=2)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--level", type=_positive, default=None)
    s.add_argument("--delta", type=_positive, default=DEFAULT_DELTA)
    s.add_argument("-o", "--output", required=True)
    s.set_defaults(func=cmd_synth)

    m = sub.add_parser("simulate", help="sample runs of a program to CSV")
    m.add_argument("model")
    m.add_argument("--program", required=True)
    m.add_argument("--init", required=True)
    m.add_argument("--seed", type=int, default=0)
    m.add_argument("--t-max", type=float, default=1.0)
    m.add_argument("--h", type=_positive, default=1e-3)
    m.add_argument("--samples", type=int, default=4)
    m.add_argument("--star-bound", type=int, default=4)
    m.add_argument("-o", "--output", required=True)
    m.set_defaults(func=cmd_simulate)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR
    except (ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
