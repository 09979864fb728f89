"""End-to-end acceptance checks.

Each test exercises one numbered requirement and prints a single
pass/fail line; run with ``pytest -v`` (add ``-s`` to see the lines as
they happen).  The exhaustive identities (2 and 3) walk the complete
unreduced space of the small instances and take a few minutes.
"""

import itertools
import json
import random
import time

import pytest

import tcmap.symexpr as se
from tcmap import cli, explorer, looptree as lt
from tcmap.config import bundled_instance_path
from tcmap.looptree import StorageNode, check_dataplacement_invariants
from tcmap.mapspace import (FAULT_STRICT_REUSE_BELOW, PMapping,
                            count_mapspace, enumerate_dataplacements,
                            enumerate_tile_shapes, generate_dataflows,
                            helpful_vars, pm_to_tree, unpruned_dataflows)
from tcmap.model import curry, direct_evaluate, evaluate_model, trace_check
from tcmap.oracle import oracle_search, verify_pruning

ALL = ("matmul-tiny", "matmul-re1", "conv-tiny", "conv-re2")
OBJECTIVES = ("edp", "energy", "latency")


def _report(num, ok, detail):
    print(f"[criterion {num:2d}] {'PASS' if ok else 'FAIL'}: {detail}",
          flush=True)
    assert ok, f"criterion {num}: {detail}"


def test_criterion_01_search_matches_oracle(bundle):
    t0 = time.perf_counter()
    mismatches = []
    for name in ALL:
        inst = bundle(name)
        for objective in OBJECTIVES:
            s = explorer.search_all(inst.workload, inst.arch, objective)
            o = oracle_search(inst.workload, inst.arch, objective,
                              cap=inst.oracle_cap)
            if s.best_metrics.objective != o.best_objective:
                mismatches.append((name, objective,
                                   s.best_metrics.objective,
                                   o.best_objective))
    dt = time.perf_counter() - t0
    ok = not mismatches and dt < 120
    _report(1, ok, f"search equals oracle on {len(ALL) * 3} "
            f"instance/objective pairs in {dt:.1f}s "
            f"(mismatches: {mismatches or 'none'})")


def test_criterion_02_currying_identity_exhaustive(bundle):
    t0 = time.perf_counter()
    checked = 0
    bad = 0
    for name in ("matmul-tiny", "conv-tiny"):
        inst = bundle(name)
        w, a = inst.workload, inst.arch
        for dp in enumerate_dataplacements(w, a):
            for pm in unpruned_dataflows(dp, w):
                cm = curry(pm, w, a, "edp")
                for env in enumerate_tile_shapes(pm, w):
                    got = evaluate_model(cm, env, a)
                    want = direct_evaluate(pm_to_tree(pm, env), w, a, "edp")
                    checked += 1
                    if got != want:
                        bad += 1
    dt = time.perf_counter() - t0
    _report(2, bad == 0 and checked == 533526 + 4778,
            f"curried == direct on all {checked} mappings of matmul-tiny "
            f"and conv-tiny ({bad} mismatches, {dt:.0f}s)")


def test_criterion_03_trace_identity_exhaustive(bundle):
    t0 = time.perf_counter()
    inst = bundle("matmul-tiny")
    w, a = inst.workload, inst.arch
    checked = 0
    bad = 0
    for dp in enumerate_dataplacements(w, a):
        for pm in unpruned_dataflows(dp, w):
            for env in enumerate_tile_shapes(pm, w):
                tree = pm_to_tree(pm, env)
                rep = trace_check(tree, w, a)
                if not rep.ok:
                    bad += 1
                for nt in rep.nodes:
                    if nt.fills != lt.tiles_fetched(tree, nt.node):
                        bad += 1
                    if nt.traffic != lt.accesses_to_above(tree, w, nt.node):
                        bad += 1
                checked += 1
    dt = time.perf_counter() - t0
    _report(3, bad == 0 and checked == 533526,
            f"trace replay equals closed-form counts on all {checked} "
            f"matmul-tiny mappings ({bad} mismatches, {dt:.0f}s)")


def test_criterion_04_slot_permutation_invariance(bundle):
    rng = random.Random(20240817)
    done = 0
    bad = 0
    insts = [bundle(n) for n in ALL]
    spaces = []
    for inst in insts:
        dps = enumerate_dataplacements(inst.workload, inst.arch)
        spaces.append((inst, dps))
    while done < 1000:
        inst, dps = spaces[done % len(spaces)]
        w, a = inst.workload, inst.arch
        dp = rng.choice(dps)
        pms = list(unpruned_dataflows(dp, w))
        pm = rng.choice(pms)
        envs = list(enumerate_tile_shapes(pm, w))
        if not envs:
            continue
        env = rng.choice(envs)
        slot = rng.randrange(dp.n_slots)
        loops = list(pm.slot_loops[slot])
        if len(loops) < 2:
            continue
        rng.shuffle(loops)
        slots2 = list(pm.slot_loops)
        slots2[slot] = tuple(loops)
        pm2 = PMapping(dp, tuple(slots2))
        # same per-slot loop set, so the symbol names coincide
        m1 = direct_evaluate(pm_to_tree(pm, env), w, a, "edp")
        m2 = direct_evaluate(pm_to_tree(pm2, env), w, a, "edp")
        if m1 != m2:
            bad += 1
        done += 1
    _report(4, bad == 0,
            f"metrics bit-identical under {done} random within-slot "
            f"loop permutations ({bad} differences)")


def test_criterion_05_loop_pruning_soundness(bundle):
    results = {}
    for name in ("matmul-tiny", "matmul-re1", "conv-tiny"):
        inst = bundle(name)
        rep = verify_pruning(inst.workload, inst.arch)
        results[name] = len(rep.violations)
    inst = bundle("matmul-tiny")
    fault = verify_pruning(inst.workload, inst.arch,
                           fault=FAULT_STRICT_REUSE_BELOW)
    clean = all(v == 0 for v in results.values())
    _report(5, clean and len(fault.violations) >= 1,
            f"pruning sound (violations {results}); injected fault "
            f"caught with {len(fault.violations)} violations")


def test_criterion_06_closed_form_counts(bundle):
    inst = bundle("matmul-re1")
    w = inst.workload
    dps = enumerate_dataplacements(w, inst.arch)
    full = next(d for d in dps if d.key() ==
                "[DRAM: A][DRAM: B][DRAM: Z][GLB: A][GLB: B][GLB: Z]")
    helpful = [helpful_vars(full, s, w)[0] for s in range(full.n_slots)]
    a_ok = (set(helpful[0]) == {"m", "k"}
            and all(len(h) == 1 for h in helpful[1:]))
    b_ok = all(len(generate_dataflows(d, w)) == 1 for d in dps)
    c_ok = len(dps) == 16 and \
        len(enumerate_dataplacements(bundle("matmul-tiny").workload,
                                     bundle("matmul-tiny").arch)) == 16
    conv = bundle("conv-tiny")
    cdps = enumerate_dataplacements(conv.workload, conv.arch)
    ca = next(d for d in cdps
              if d.key() == "[DRAM: W][DRAM: A][DRAM: Z][GLB: A]")
    d_ok = len(generate_dataflows(ca, conv.workload)) == 2
    _report(6, a_ok and b_ok and c_ok and d_ok,
            f"helpful loops go to 1 per inner slot ({a_ok}), one reduced "
            f"dataflow per matmul placement ({b_ok}), 16 placements "
            f"({c_ok}), 2 window variants for conv GLB:A ({d_ok})")


def test_criterion_07_reference_expressions(bundle):
    inst = bundle("matmul-re1")
    dps = enumerate_dataplacements(inst.workload, inst.arch)
    dp = next(d for d in dps
              if d.key() == "[DRAM: A][DRAM: B][DRAM: Z][GLB: A][GLB: B]")
    pm = PMapping(dp, (("m", "k"), ("n",), ("m", "k", "n")))
    cm = curry(pm, inst.workload, inst.arch, "edp")
    acc = cm.node_accesses[StorageNode("GLB", "B")]
    acc_ok = acc == se.prod_of([se.const(16), se.Sym("M1")])
    usage = cm.usage["GLB"]
    use_ok = isinstance(usage, se.Sum) and \
        se.prod_of([se.Sym("K0"), se.Sym("M0")]) in usage.terms
    _report(7, acc_ok and use_ok,
            f"accesses(GLB:B) folds to 16*M1 ({se.to_text(acc)}); "
            f"usage(GLB) contains K0*M0 ({se.to_text(usage)})")


def test_criterion_08_invariants_on_generated_mappings(bundle):
    checked = 0
    bad = 0
    for name in ALL:
        inst = bundle(name)
        w, a = inst.workload, inst.arch
        for dp in enumerate_dataplacements(w, a):
            for pm in generate_dataflows(dp, w):
                for env in enumerate_tile_shapes(pm, w):
                    tree = pm_to_tree(pm, env)
                    if check_dataplacement_invariants(tree, w):
                        bad += 1
                    checked += 1
    _report(8, bad == 0 and checked > 0,
            f"dataplacement invariants empty on all {checked} generated "
            f"mappings across {len(ALL)} instances ({bad} violations)")


def test_criterion_09_partial_pruning_completeness(bundle):
    inst = bundle("matmul-re1")
    w, a = inst.workload, inst.arch
    pms = 0
    best_diffs = 0
    audit_bad = 0
    unretained = 0
    for dp in enumerate_dataplacements(w, a):
        for pm in generate_dataflows(dp, w):
            cm = curry(pm, w, a, "edp")
            fast = explorer.explore_tile_shapes(cm, w, a, prune=True,
                                                audit=True)
            full = explorer.explore_tile_shapes(cm, w, a, prune=False)
            if (fast.best is None) != (full.best is None):
                best_diffs += 1
            elif fast.best is not None and \
                    fast.best[0].objective != full.best[0].objective:
                best_diffs += 1
            audit_bad += len(explorer.verify_audit(cm, a, fast.events))
            pruned = {}
            for ev in fast.events:
                pruned.setdefault(ev.step, set()).add(
                    tuple(sorted(ev.pruned_env.items())))
            for ev in fast.events:
                if ev.kind == "dominated":
                    key = tuple(sorted(ev.dominator_env.items()))
                    if key in pruned.get(ev.step, ()):
                        unretained += 1
            pms += 1
    ok = best_diffs == 0 and audit_bad == 0 and unretained == 0
    _report(9, ok,
            f"pruned search replays to the unpruned optimum on all {pms} "
            f"matmul-re1 dataflows; every prune audits clean against a "
            f"retained dominator ({best_diffs}/{audit_bad}/{unretained} "
            f"bad)")


def test_criterion_10_thread_count_determinism(bundle, capsys):
    diffs = []
    for name in ALL:
        path = bundled_instance_path(name)
        outs = []
        for threads in ("1", "4"):
            code = cli.main(["map", path, "--output", "json",
                             "--threads", threads])
            assert code == 0
            outs.append(capsys.readouterr().out)

        def strip(text):
            lines = [ln for ln in text.splitlines(keepends=True)
                     if '"wall_time_ms"' not in ln]
            return "".join(lines)

        if strip(outs[0]) != strip(outs[1]):
            diffs.append(name)
        for out in outs:
            json.loads(out)  # both sides stay well-formed
    _report(10, not diffs,
            f"map JSON byte-identical for threads 1 vs 4 modulo "
            f"wall_time_ms on {len(ALL)} instances "
            f"(differences: {diffs or 'none'})")


def test_criterion_11_pruning_ratio_trend():
    t0 = time.perf_counter()
    from tcmap.archspec import parse_arch
    from tcmap.workload import parse_workload
    ratios = []
    for s in (4, 8, 16):
        w = parse_workload({
            "ranks": {"m": s, "n": s, "k": s},
            "tensors": [
                {"name": "A", "role": "input", "dims": ["m", "k"]},
                {"name": "B", "role": "input", "dims": ["k", "n"]},
                {"name": "Z", "role": "output", "dims": ["m", "n"]},
            ],
        })
        a = parse_arch({
            "levels": [
                {"name": "DRAM", "bandwidth": 2, "access_energy": 100},
                {"name": "GLB", "capacity": 16, "bandwidth": 4,
                 "access_energy": 1},
            ],
            "compute": {"energy": 0.5, "parallel_units": 1},
        })
        st = count_mapspace(w, a)
        ratios.append(st.product_pruned / st.product_raw)
    dt = time.perf_counter() - t0
    decreasing = all(b < a for a, b in zip(ratios, ratios[1:]))
    _report(11, decreasing and dt < 10,
            f"reduced/full ratio falls with scale: "
            f"{', '.join(f'{r:.3g}' for r in ratios)} ({dt:.2f}s)")
