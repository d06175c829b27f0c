"""Compilation of terms into a flat instruction tape.

A tape is four parallel arrays (opcode, operand a, operand b, constant).
Each instruction writes one slot; operands refer to earlier slots.
Structurally equal subterms share a slot.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..hp.ast import Add, Const, Div, LVar, Mul, Neg, Pow, Sqrt, Sub, Term, Var

OP_CONST, OP_VAR, OP_NEG, OP_ADD, OP_SUB, OP_MUL, OP_DIV, OP_POW, OP_SQRT = range(9)

_BINARY = {Add: OP_ADD, Sub: OP_SUB, Mul: OP_MUL, Div: OP_DIV}


@dataclass
class Tape:
    op: np.ndarray  # int32
    a: np.ndarray  # int32
    b: np.ndarray  # int32
    val: np.ndarray  # float64
    outputs: np.ndarray  # int32, slot of each compiled root

    def __len__(self) -> int:
        return len(self.op)


def compile_tape(terms: list[Term], var_index: dict[str, int]) -> Tape:
    ops: list[int] = []
    aa: list[int] = []
    bb: list[int] = []
    vals: list[float] = []
    memo: dict[Term, int] = {}

    def emit(op: int, a: int = 0, b: int = 0, v: float = 0.0) -> int:
        ops.append(op)
        aa.append(a)
        bb.append(b)
        vals.append(v)
        return len(ops) - 1

    def go(t: Term) -> int:
        hit = memo.get(t)
        if hit is not None:
            return hit
        if isinstance(t, Const):
            k = emit(OP_CONST, v=t.value)
        elif isinstance(t, (Var, LVar)):
            k = emit(OP_VAR, a=var_index[t.name])
        elif isinstance(t, Neg):
            k = emit(OP_NEG, a=go(t.arg))
        elif isinstance(t, Pow):
            k = emit(OP_POW, a=go(t.base), b=t.exp)
        elif isinstance(t, Sqrt):
            k = emit(OP_SQRT, a=go(t.arg))
        else:
            x = go(t.left)
            y = go(t.right)
            k = emit(_BINARY[type(t)], a=x, b=y)
        memo[t] = k
        return k

    outs = [go(t) for t in terms]
    return Tape(
        np.asarray(ops, dtype=np.int32),
        np.asarray(aa, dtype=np.int32),
        np.asarray(bb, dtype=np.int32),
        np.asarray(vals, dtype=np.float64),
        np.asarray(outs, dtype=np.int32),
    )
