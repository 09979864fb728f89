"""Throughput comparison of the two expression-sweep backends.

Compiles the cost expressions of one dataflow into a tape, then times
batch evaluation over tile-shape rows on the compiled extension and on
the pure-Python interpreter.  Run from a checkout:

    python3 benchmarks/bench_kernel.py [--rows N] [--repeat K]
"""

import argparse
import time

from tcmap import _sweep_py as sp
from tcmap import kernel
from tcmap.archspec import parse_arch
from tcmap.mapspace import enumerate_dataplacements, enumerate_tile_shapes, \
    generate_dataflows
from tcmap.model import curry
from tcmap.workload import parse_workload


def build_case(size):
    w = parse_workload({
        "ranks": {"m": size, "n": size, "k": size},
        "tensors": [
            {"name": "A", "role": "input", "dims": ["m", "k"]},
            {"name": "B", "role": "input", "dims": ["k", "n"]},
            {"name": "Z", "role": "output", "dims": ["m", "n"]},
        ],
    })
    a = parse_arch({
        "levels": [
            {"name": "DRAM", "bandwidth": 2, "access_energy": 100},
            {"name": "GLB", "capacity": 4096, "bandwidth": 4,
             "access_energy": 1},
        ],
        "compute": {"energy": 0.5, "parallel_units": 1},
    })
    dps = enumerate_dataplacements(w, a)
    dp = next(d for d in dps if d.key() ==
              "[DRAM: A][DRAM: B][DRAM: Z][GLB: A][GLB: B][GLB: Z]")
    pm = generate_dataflows(dp, w)[0]
    cm = curry(pm, w, a, "edp")
    rows = [[env[s] for s in cm.symbols] for env in
            enumerate_tile_shapes(pm, w)]
    return cm, rows


def bench(fn, repeat):
    best = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        dt = time.perf_counter() - t0
        if best is None or dt < best[0]:
            best = (dt, out)
    return best


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--rows", type=int, default=50000,
                    help="minimum number of batch rows (default 50000)")
    ap.add_argument("--repeat", type=int, default=5,
                    help="timing repetitions, best is kept (default 5)")
    args = ap.parse_args()

    cm, rows = build_case(64)
    while len(rows) < args.rows:
        rows = rows + rows
    rows = rows[:args.rows]
    tape = kernel.compile_model(cm)
    print(f"tape: {len(tape.program)} ops, {len(cm.symbols)} symbols, "
          f"{tape.n_outputs} outputs; batch of {len(rows)} rows")

    t_pure, out_pure = bench(
        lambda: sp.run_batch(tape.program, tape.consts, tape.n_outputs,
                             rows), args.repeat)
    print(f"pure     : {t_pure:8.3f}s  {len(rows) / t_pure:12.0f} rows/s")

    ct = tape.ctape()
    if ct is None:
        print("compiled : unavailable (pure-Python build)")
        return
    t_comp, raw = bench(lambda: ct.run_batch(rows), args.repeat)
    out_comp = [[kernel._from_pair(p) for p in pairs] for pairs in raw]
    print(f"compiled : {t_comp:8.3f}s  {len(rows) / t_comp:12.0f} rows/s")
    print(f"speedup  : {t_pure / t_comp:8.2f}x")
    if out_comp != out_pure:
        raise SystemExit("backend outputs disagree")
    print("outputs  : identical")


if __name__ == "__main__":
    main()
