"""Evaluation kernel: compiles curried-model expressions to a flat tape
and runs it on the fastest backend available.

The compiled extension is optional; without it (or with TCMAP_PURE set)
the pure interpreter runs everything.  The compiled path hands any row
that would overflow 62-bit rationals back to the pure one, so both
backends produce identical exact results.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from . import _sweep_py as sp
from . import symexpr as se

try:  # pragma: no cover - exercised only when the extension is absent
    from . import _sweep as _csweep
except ImportError:
    _csweep = None

_FORCE_PURE = bool(os.environ.get("TCMAP_PURE"))


def backend_name() -> str:
    if _csweep is not None and not _FORCE_PURE:
        return "compiled"
    return "pure"


@dataclass
class Tape:
    program: list[tuple[int, int]]
    consts: list[tuple[int, int]]
    n_outputs: int
    n_symbols: int
    max_stack: int
    _ctape: Optional[object] = field(default=None, repr=False)

    def ctape(self):
        if _csweep is None or _FORCE_PURE:
            return None
        if self._ctape is None:
            self._ctape = _csweep.make_tape(self.program, self.consts,
                                            self.n_outputs, self.max_stack)
        return self._ctape


def compile_exprs(exprs: list[se.Expr], symbols: tuple[str, ...]) -> Tape:
    sym_index = {s: i for i, s in enumerate(symbols)}
    program: list[tuple[int, int]] = []
    consts: list[tuple[int, int]] = []
    const_index: dict[tuple[int, int], int] = {}
    depth = 0
    max_depth = 0

    def intern(value: se.Number) -> int:
        f = Fraction(value)
        key = (f.numerator, f.denominator)
        if key not in const_index:
            const_index[key] = len(consts)
            consts.append(key)
        return const_index[key]

    def push(n: int) -> None:
        nonlocal depth, max_depth
        depth += n
        if depth > max_depth:
            max_depth = depth

    def emit(e: se.Expr) -> None:
        if isinstance(e, se.Const):
            program.append((sp.PUSH_CONST, intern(e.value)))
            push(1)
        elif isinstance(e, se.Sym):
            program.append((sp.PUSH_SYM, sym_index[e.name]))
            push(1)
        elif isinstance(e, (se.Sum, se.Prod, se.Max, se.Min)):
            parts = e.terms if isinstance(e, (se.Sum, se.Max, se.Min)) \
                else e.factors
            op = {se.Sum: sp.ADD, se.Prod: sp.MUL,
                  se.Max: sp.MAX, se.Min: sp.MIN}[type(e)]
            for i, part in enumerate(parts):
                emit(part)
                if i:
                    program.append((op, 0))
                    push(-1)
        elif isinstance(e, se.DivC):
            emit(e.num)
            program.append((sp.DIVC, intern(e.den)))
        elif isinstance(e, se.CeilDiv):
            emit(e.num)
            program.append((sp.CEILDIV, intern(e.den)))
        else:
            raise TypeError(f"cannot compile {type(e).__name__}")

    for j, e in enumerate(exprs):
        emit(e)
        program.append((sp.OUT, j))
        push(-1)

    return Tape(program=program, consts=consts, n_outputs=len(exprs),
                n_symbols=len(symbols), max_stack=max_depth)


def compile_model(cm) -> Tape:
    return compile_exprs(cm.outputs(), cm.symbols)


def _from_pair(pair: tuple[int, int]) -> se.Number:
    n, d = pair
    if d == 1:
        return n
    return Fraction(n, d)


def run(tape: Tape, syms: list[int]) -> list[se.Number]:
    ct = tape.ctape()
    if ct is not None:
        pairs = ct.run(syms)
        if pairs is not None:
            return [_from_pair(p) for p in pairs]
    return sp.run_tape(tape.program, tape.consts, tape.n_outputs, syms)


def run_batch(tape: Tape, rows: list[list[int]]) -> list[list[se.Number]]:
    ct = tape.ctape()
    if ct is not None:
        out = []
        for row, pairs in zip(rows, ct.run_batch(rows)):
            if pairs is None:
                out.append(sp.run_tape(tape.program, tape.consts,
                                       tape.n_outputs, row))
            else:
                out.append([_from_pair(p) for p in pairs])
        return out
    return sp.run_batch(tape.program, tape.consts, tape.n_outputs, rows)
