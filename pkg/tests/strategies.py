"""Hypothesis strategies and random generators for ASTs over a small variable set."""
import random

from hypothesis import strategies as st

from ficut.hp.ast import (
    Add, And, Assign, Cmp, Const, Havoc, Implies, Mul, Neg, Not, Or, Pow, Seq, Choice, Star, Sub,
    Test as QTest, Var,
)

VARS = ("x", "y", "z")

consts = st.integers(-3, 3).map(lambda v: Const(float(v)))
variables = st.sampled_from(VARS).map(Var)


def _grow_term(children):
    return st.one_of(
        st.tuples(children, children).map(lambda ab: Add(*ab)),
        st.tuples(children, children).map(lambda ab: Sub(*ab)),
        st.tuples(children, children).map(lambda ab: Mul(*ab)),
        children.map(Neg),
        st.tuples(children, st.integers(0, 3)).map(lambda ae: Pow(*ae)),
    )


terms = st.recursive(st.one_of(consts, variables), _grow_term, max_leaves=6)
atoms = st.builds(Cmp, st.sampled_from(["=", "<=", "<", ">=", ">"]), terms, terms)


def _grow_formula(children):
    return st.one_of(
        children.map(Not),
        st.tuples(children, children).map(lambda ab: And(*ab)),
        st.tuples(children, children).map(lambda ab: Or(*ab)),
        st.tuples(children, children).map(lambda ab: Implies(*ab)),
    )


formulas = st.recursive(atoms, _grow_formula, max_leaves=4)
states = st.fixed_dictionaries({v: st.integers(-4, 4).map(float) for v in VARS})


def _grow_program(children):
    return st.one_of(
        st.tuples(children, children).map(lambda ab: Seq(*ab)),
        st.tuples(children, children).map(lambda ab: Choice(*ab)),
        children.map(Star),
    )


simple_programs = st.one_of(
    st.builds(Assign, st.sampled_from(VARS), st.one_of(consts, variables)),
    st.builds(QTest, atoms),
    st.builds(Havoc, st.sampled_from(VARS)),
)
programs = st.recursive(simple_programs, _grow_program, max_leaves=5)


# ---------------------------------------------------- seeded generators for fuzzing
# Grid values are 0, 1, 2; assignments stay on the grid so no transition is clipped.

GRID_VALUES = (0.0, 1.0, 2.0)


def rand_atom(rng: random.Random):
    x = Var(rng.choice(VARS))
    kind = rng.random()
    if kind < 0.6:
        return Cmp(rng.choice(["=", "<=", ">=", "<", ">"]), x, Const(rng.choice(GRID_VALUES)))
    return Cmp(rng.choice(["=", "<=", "<"]), x, Var(rng.choice(VARS)))


def rand_formula(rng: random.Random, depth: int = 2):
    if depth == 0 or rng.random() < 0.4:
        return rand_atom(rng)
    k = rng.random()
    if k < 0.2:
        return Not(rand_formula(rng, depth - 1))
    a, b = rand_formula(rng, depth - 1), rand_formula(rng, depth - 1)
    return And(a, b) if k < 0.6 else Or(a, b)


def rand_program(rng: random.Random, depth: int = 3, star: bool = True):
    if depth == 0 or rng.random() < 0.3:
        k = rng.random()
        v = rng.choice(VARS)
        if k < 0.45:
            return Assign(v, Const(rng.choice(GRID_VALUES)))
        if k < 0.65:
            return Assign(v, Var(rng.choice(VARS)))
        if k < 0.9:
            return QTest(rand_formula(rng, 1))
        return Havoc(v)
    k = rng.random()
    if k < 0.45:
        return Seq(rand_program(rng, depth - 1, star), rand_program(rng, depth - 1, star))
    if k < 0.85 or not star:
        return Choice(rand_program(rng, depth - 1, star), rand_program(rng, depth - 1, star))
    return Star(rand_program(rng, depth - 1, star))


# ------------------------------------------------------- icp system generators


def rand_poly_term(rng: random.Random, names, depth: int = 3):
    if depth == 0 or rng.random() < 0.3:
        if rng.random() < 0.6:
            return Var(rng.choice(names))
        return Const(float(rng.randint(-4, 4)) / 2)
    k = rng.random()
    a = rand_poly_term(rng, names, depth - 1)
    if k < 0.1:
        return Pow(a, rng.randint(2, 3))
    b = rand_poly_term(rng, names, depth - 1)
    if k < 0.45:
        return Add(a, b)
    if k < 0.7:
        return Sub(a, b)
    return Mul(a, b)


def planted_system(rng: random.Random, nvars: int = 3, ncons: int = 3):
    """Constraints built to hold at a planted point with exactly representable coordinates."""
    from ficut.hp.evaluate import eval_term
    from ficut.icp.interval import Box
    from ficut.icp.solver import Constraint, ConstraintSystem

    names = tuple(f"v{i}" for i in range(nvars))
    point = {n: rng.randint(-8, 8) / 4 for n in names}
    cons = []
    for _ in range(ncons):
        t = rand_poly_term(rng, names)
        val = eval_term(point, {}, t)
        rel = rng.choice(["<=", "=", "<"])
        rhs = val + (0.25 if rel == "<" else 0.0)
        cons.append(Constraint(Sub(t, Const(rhs)), rel))
    box = Box(names, [-3.0] * nvars, [3.0] * nvars)
    return ConstraintSystem(cons, box, 1e-3), point


def infeasible_system(rng: random.Random, nvars: int = 3):
    """A positive combination of squares bounded above by a negative constant."""
    from ficut.icp.interval import Box
    from ficut.icp.solver import Constraint, ConstraintSystem

    names = tuple(f"v{i}" for i in range(nvars))
    t = None
    for n in names:
        c = Const(float(rng.randint(1, 5)))
        shift = Const(rng.randint(-4, 4) / 2)
        sq = Mul(c, Pow(Sub(Var(n), shift), 2))
        t = sq if t is None else Add(t, sq)
    neg = -rng.randint(1, 20) / 10
    box = Box(names, [-10.0] * nvars, [10.0] * nvars)
    return ConstraintSystem([Constraint(Sub(t, Const(neg)), "<=")], box, 1e-3)


# ------------------------------------------------------------ rule soundness


def rule_fuzz(rule, n: int, seed: int):
    """Count (premises valid, conclusion invalid) instances of a three-premise loop rule.

    Returns (instances where all premises held, violations).
    """
    from ficut.hp.ast import Box as BoxF, Implies
    from ficut.hp.oracle import Grid, GridOracle
    from ficut.proof.goals import Goal

    grid = Grid.from_dict({v: list(GRID_VALUES) for v in VARS})
    rng = random.Random(seed)
    held = bad = 0
    for _ in range(n):
        oracle = GridOracle(grid)
        alpha = rand_program(rng, 3, star=False)
        I, S = rand_formula(rng), rand_formula(rng)
        # cut candidates biased towards sets that are often invariant
        C = rng.choice([rand_formula(rng), S, Or(I, rand_formula(rng, 1))])
        g = Goal(I, Star(alpha), S)
        premises = rule(g, C)
        if all(oracle.valid(p.formula()) for p in premises):
            held += 1
            if not oracle.valid(Implies(I, BoxF(Star(alpha), S))):
                bad += 1
    return held, bad
