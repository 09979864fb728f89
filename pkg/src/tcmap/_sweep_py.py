"""Pure-Python tape interpreter.

Reference backend for the evaluation kernel: exact arithmetic over int
with Fraction spill, no dependencies.  The compiled backend must agree
with this one bit for bit after normalization.
"""

from __future__ import annotations

from fractions import Fraction
from math import ceil

PUSH_SYM = 0
PUSH_CONST = 1
ADD = 2
MUL = 3
MAX = 4
MIN = 5
DIVC = 6
CEILDIV = 7
OUT = 8


def _div_exact(x, num: int, den: int):
    # x / (num/den)
    if isinstance(x, int):
        top = x * den
        if top % num == 0:
            return top // num
        return Fraction(top, num)
    q = x * Fraction(den, num)
    if q.denominator == 1:
        return int(q)
    return q


def run_tape(program, consts, n_outputs: int, syms):
    stack = []
    out = [0] * n_outputs
    for op, arg in program:
        if op == PUSH_SYM:
            stack.append(syms[arg])
        elif op == PUSH_CONST:
            n, d = consts[arg]
            stack.append(n if d == 1 else Fraction(n, d))
        elif op == ADD:
            b = stack.pop()
            stack[-1] = stack[-1] + b
        elif op == MUL:
            b = stack.pop()
            stack[-1] = stack[-1] * b
        elif op == MAX:
            b = stack.pop()
            if b > stack[-1]:
                stack[-1] = b
        elif op == MIN:
            b = stack.pop()
            if b < stack[-1]:
                stack[-1] = b
        elif op == DIVC:
            n, d = consts[arg]
            stack[-1] = _div_exact(stack[-1], n, d)
        elif op == CEILDIV:
            n, d = consts[arg]
            q = _div_exact(stack[-1], n, d)
            stack[-1] = q if isinstance(q, int) else ceil(q)
        elif op == OUT:
            out[arg] = stack.pop()
        else:
            raise ValueError(f"bad opcode {op}")
    return [int(v) if isinstance(v, Fraction) and v.denominator == 1 else v
            for v in out]


def run_batch(program, consts, n_outputs: int, rows):
    return [run_tape(program, consts, n_outputs, r) for r in rows]
