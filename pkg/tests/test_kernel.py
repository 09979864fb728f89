import random
import subprocess
import sys
from fractions import Fraction

import pytest

import tcmap.symexpr as se
from tcmap import _sweep_py as sp
from tcmap import kernel

X, Y = se.Sym("x"), se.Sym("y")
SYMS = ("x", "y")


def _run_pure(tape, row):
    return sp.run_tape(tape.program, tape.consts, tape.n_outputs, row)


def test_backend_name_reports_a_backend():
    assert kernel.backend_name() in ("compiled", "pure")


def test_pure_env_forces_fallback():
    out = subprocess.run(
        [sys.executable, "-c",
         "import tcmap.kernel as k; print(k.backend_name())"],
        capture_output=True, text=True, env={"TCMAP_PURE": "1"})
    assert out.stdout.strip() == "pure"


def test_compile_and_run_simple():
    tape = kernel.compile_exprs(
        [se.sum_of([X, Y]), se.prod_of([X, Y, se.const(3)])], SYMS)
    assert tape.n_outputs == 2
    assert kernel.run(tape, [2, 5]) == [7, 30]


def test_fractional_results_are_exact():
    tape = kernel.compile_exprs([se.div_const(X, 3)], SYMS)
    assert kernel.run(tape, [2, 0]) == [Fraction(2, 3)]
    assert kernel.run(tape, [6, 0]) == [2]
    assert isinstance(kernel.run(tape, [6, 0])[0], int)


def test_ceil_div_negative_numerator():
    e = se.ceil_div(se.sum_of([X, se.const(-5)]), 3)
    tape = kernel.compile_exprs([e], SYMS)
    assert kernel.run(tape, [1, 0]) == [-1]
    assert kernel.run(tape, [5, 0]) == [0]
    assert kernel.run(tape, [9, 0]) == [2]


def test_max_min():
    tape = kernel.compile_exprs(
        [se.max_of([se.div_const(X, 2), Y]), se.min_of([X, Y])], SYMS)
    assert kernel.run(tape, [5, 2]) == [Fraction(5, 2), 2]
    assert kernel.run(tape, [5, 3]) == [3, 3]


def test_run_batch_matches_run():
    tape = kernel.compile_exprs(
        [se.sum_of([se.prod_of([X, X]), Y]), se.div_const(Y, 4)], SYMS)
    rows = [[i, j] for i in range(1, 6) for j in range(1, 6)]
    assert kernel.run_batch(tape, rows) == [kernel.run(tape, r) for r in rows]


def test_backends_agree_on_random_expressions():
    rng = random.Random(7)

    def rand_expr(depth):
        if depth == 0 or rng.random() < 0.3:
            if rng.random() < 0.5:
                return se.const(rng.randint(-6, 12))
            return se.Sym(rng.choice(SYMS))
        kids = [rand_expr(depth - 1) for _ in range(rng.randint(1, 3))]
        kind = rng.randrange(6)
        if kind == 0:
            return se.sum_of(kids)
        if kind == 1:
            return se.prod_of(kids)
        if kind == 2:
            return se.max_of(kids)
        if kind == 3:
            return se.min_of(kids)
        if kind == 4:
            return se.div_const(kids[0], rng.randint(1, 6))
        return se.ceil_div(kids[0], rng.randint(1, 6))

    for _ in range(150):
        exprs = [rand_expr(3) for _ in range(rng.randint(1, 4))]
        tape = kernel.compile_exprs(exprs, SYMS)
        row = [rng.randint(1, 9), rng.randint(1, 9)]
        got = kernel.run(tape, row)
        env = dict(zip(SYMS, row))
        assert got == [se.evaluate(e, env) for e in exprs]
        assert got == _run_pure(tape, row)


def test_overflow_row_falls_back_to_exact_bignums():
    big = 1 << 40
    tape = kernel.compile_exprs([se.prod_of([X, X])], SYMS)
    assert kernel.run(tape, [big, 0]) == [1 << 80]
    out = kernel.run_batch(tape, [[2, 0], [big, 0], [3, 0]])
    assert out == [[4], [1 << 80], [9]]


@pytest.mark.skipif(kernel.backend_name() != "compiled",
                    reason="needs the compiled extension")
def test_compiled_tape_reports_overflow_as_none():
    big = 1 << 40
    tape = kernel.compile_exprs([se.prod_of([X, X])], SYMS)
    ct = tape.ctape()
    assert ct is not None
    assert ct.run([3, 0]) == [(9, 1)]
    assert ct.run([big, 0]) is None


@pytest.mark.skipif(kernel.backend_name() != "compiled",
                    reason="needs the compiled extension")
def test_compiled_pairs_are_reduced():
    tape = kernel.compile_exprs([se.div_const(X, 6)], SYMS)
    ct = tape.ctape()
    assert ct.run([4, 0]) == [(2, 3)]


def test_constants_are_interned():
    e1 = se.sum_of([X, se.const(7)])
    e2 = se.prod_of([Y, se.const(7)])
    tape = kernel.compile_exprs([e1, e2], SYMS)
    assert tape.consts.count((7, 1)) == 1


def test_stack_depth_is_tracked():
    deep = X
    for _ in range(20):
        deep = se.sum_of([se.prod_of([deep, Y]), se.const(1)])
    tape = kernel.compile_exprs([deep], SYMS)
    assert tape.max_stack >= 2
    assert kernel.run(tape, [1, 1]) == [21]
