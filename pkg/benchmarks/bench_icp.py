"""Time the compiled and pure-Python branch-and-prune kernels on the same queries.

    python3 benchmarks/bench_icp.py [--repeat 3]

Both backends must agree on every verdict and box count; the script exits
nonzero otherwise.
"""
import argparse
import random
import sys
import time
from pathlib import Path

from ficut.hp.parser import SymbolTable, parse_term
from ficut.icp import kernel
from ficut.icp.interval import Box
from ficut.icp.solver import Constraint, ConstraintSystem, check

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "tests"))
from strategies import infeasible_system, planted_system  # noqa: E402

SYM = SymbolTable(state_vars=["x", "y", "z"])


def workload():
    rng = random.Random(0)
    systems = [planted_system(rng)[0] for _ in range(40)] + [infeasible_system(rng) for _ in range(10)]
    T = lambda s: parse_term(s, SYM)  # noqa: E731
    # a thin shell where pruning alone does little and bisection dominates
    systems.append(ConstraintSystem(
        [Constraint(T("x^2 + y^2 - 1"), "<="), Constraint(T("0.99 - x^2 - y^2"), "<="),
         Constraint(T("0.49 - x*y"), "<=")],
        Box(("x", "y"), [-1.5, -1.5], [1.5, 1.5]), 1e-4))
    return systems


def run(mod, systems, repeat):
    kernel.solve, kernel.eval_tape = mod.solve, mod.eval_tape
    best, results = float("inf"), None
    for _ in range(repeat):
        t0 = time.perf_counter()
        results = [check(s, relaxation=False, max_boxes=10 ** 7) for s in systems]
        best = min(best, time.perf_counter() - t0)
    return best, results


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    mods = kernel.backends()
    if "cython" not in mods:
        print("compiled kernel not built; run `pip install -e . --no-build-isolation`")
        return 1
    systems = workload()
    saved = kernel.solve, kernel.eval_tape
    try:
        timing = {name: run(mods[name], systems, args.repeat) for name in ("python", "cython")}
    finally:
        kernel.solve, kernel.eval_tape = saved
    (tp, rp), (tc, rc) = timing["python"], timing["cython"]
    boxes = sum(r.stats["boxes"] for r in rp)
    agree = all(a.is_unsat == b.is_unsat and a.stats["boxes"] == b.stats["boxes"] for a, b in zip(rp, rc))
    print(f"{len(systems)} systems, {boxes} boxes per pass, best of {args.repeat}")
    print(f"python  {tp:8.3f} s")
    print(f"cython  {tc:8.3f} s   speedup {tp / tc:.1f}x")
    print(f"verdicts and box counts agree: {agree}")
    return 0 if agree else 1


if __name__ == "__main__":
    sys.exit(main())
