"""Brute-force reference search and pruning verifier.

The oracle enumerates the unreduced mapping space: every dataplacement,
every per-slot loop permutation, every perfect factorization.  Metrics
of a mapping depend only on which loop bound lands in which slot, never
on the order of loops within a slot (the line buffer is the one feature
sensitive to that order, so enabling it switches the oracle to literal
order-by-order enumeration).  Per assignment class one representative is
evaluated through ``direct_evaluate`` and counted with the class's
multiplicity, which keeps the oracle honest and affordable at once.

``verify_pruning`` replays the reduction argument mapping by mapping:
every unreduced mapping is reduced by sliding each useless loop to the
nearest slot where it pulls its weight (down past nodes that do not see
the variable, which cuts refetches; up past nodes fully indexed by it,
which shrinks tiles at equal traffic), and the result must exist in the
generated space with no worse objective and no larger usage anywhere.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, Optional

from .archspec import Arch
from .looptree import LoopTree
from .mapspace import (Dataplacement, PMapping, canonical_unpruned_pm,
                       count_mapspace, enumerate_dataplacements,
                       enumerate_tile_shapes, generate_dataflows,
                       sym_name, pm_to_tree, unpruned_dataflows,
                       FAULT_STRICT_REUSE_BELOW)
from .model import (CapExceeded, Metrics, ModelOptions, curry,
                    direct_evaluate, evaluate_model)
from .workload import FULL, NONE, Workload, relevance

__all__ = ["CapExceeded", "OracleReport", "PruningReport",
           "enumerate_unpruned_mapspace", "oracle_search", "verify_pruning"]


def enumerate_unpruned_mapspace(w: Workload, a: Arch
                                ) -> Iterator[tuple[PMapping, dict[str, int]]]:
    """Literal stream of every mapping in the unreduced space."""
    for dp in enumerate_dataplacements(w, a):
        for pm in unpruned_dataflows(dp, w):
            for env in enumerate_tile_shapes(pm, w):
                yield pm, env


@dataclass
class OracleReport:
    objective: str
    total_mappings: int
    valid_mappings: int
    best_objective: Optional[object]
    best_metrics: Optional[Metrics]
    best_pm: Optional[PMapping]
    best_bounds: Optional[dict[str, int]]
    best_tree: Optional[LoopTree]
    histogram: dict[str, int] = field(default_factory=dict)


def oracle_search(w: Workload, a: Arch, objective: str = "edp",
                  cap: int = 10 ** 7,
                  options: ModelOptions = ModelOptions()) -> OracleReport:
    stats = count_mapspace(w, a)
    if stats.product_raw > cap:
        raise CapExceeded(f"unreduced space has {stats.product_raw} "
                          f"mappings, cap is {cap}")

    n_perm = math.factorial(len(w.rank_names))
    total = 0
    valid = 0
    hist: dict[str, int] = {}
    best: Optional[tuple[Metrics, PMapping, dict[str, int]]] = None

    for dp in enumerate_dataplacements(w, a):
        hist.setdefault(dp.key(), 0)
        if options.line_buffer:
            reps: Iterator[tuple[PMapping, int]] = \
                ((pm, 1) for pm in unpruned_dataflows(dp, w))
        else:
            reps = iter([(canonical_unpruned_pm(dp, w),
                          n_perm ** dp.n_slots)])
        for pm, weight in reps:
            for env in enumerate_tile_shapes(pm, w):
                m = direct_evaluate(pm_to_tree(pm, env), w, a,
                                    objective, options)
                total += weight
                if m.valid:
                    valid += weight
                    hist[dp.key()] += weight
                    if best is None or m.objective < best[0].objective:
                        best = (m, pm, env)

    if best is None:
        return OracleReport(objective, total, valid, None, None, None,
                            None, None, hist)
    m, pm, env = best
    return OracleReport(objective, total, valid, m.objective, m, pm, env,
                        pm_to_tree(pm, env), hist)


@dataclass
class PruningReport:
    checked: int
    table_size: int
    violations: list[str]

    @property
    def ok(self) -> bool:
        return not self.violations


def _assignment_key(pm: PMapping, env: dict[str, int]) -> tuple:
    slots: list[list[tuple[str, int]]] = [[] for _ in range(pm.dp.n_slots)]
    for s, v, i in pm.loops():
        b = env[sym_name(v, i)]
        if b > 1:
            slots[s].append((v, b))
    return tuple(tuple(sorted(sl)) for sl in slots)


def _reduce_assignment(dp: Dataplacement, pm: PMapping,
                       env: dict[str, int], w: Workload,
                       fault: Optional[str]) -> tuple:
    acc: list[dict[str, int]] = [dict() for _ in range(dp.n_slots)]
    for s, v, i in pm.loops():
        b = env[sym_name(v, i)]
        if b == 1:
            continue
        below = dp.below_node(s)
        if below is None:
            below_ok = fault != FAULT_STRICT_REUSE_BELOW
        else:
            below_ok = relevance(w.tensor(below.tensor), v) != NONE
        if s == 0:
            above_ok = True
        else:
            above_ok = relevance(w.tensor(dp.above_node(s).tensor), v) != FULL
        t = s
        if not below_ok:
            # slide down past nodes blind to v: each crossing drops a
            # factor b of refetch traffic at the crossed node
            while dp.below_node(t) is not None and \
                    relevance(w.tensor(dp.below_node(t).tensor), v) == NONE:
                t += 1
        elif not above_ok:
            # slide up past nodes fully indexed by v: tiles shrink,
            # traffic stays put
            while t > 0 and \
                    relevance(w.tensor(dp.above_node(t).tensor), v) == FULL:
                t -= 1
        acc[t][v] = acc[t].get(v, 1) * b
    return tuple(tuple(sorted(d.items())) for d in acc)


def verify_pruning(w: Workload, a: Arch, fault: Optional[str] = None,
                   objective: str = "edp",
                   options: ModelOptions = ModelOptions()) -> PruningReport:
    """Check that reducing any unreduced mapping lands inside the
    generated space at an objective and usage no worse than the
    original's.  A nonempty violation list means the generator and the
    reduction argument disagree."""
    table: dict[tuple, Metrics] = {}
    dps = enumerate_dataplacements(w, a)
    for dp in dps:
        for pm in generate_dataflows(dp, w, fault):
            counts = pm.var_counts()
            if any(counts.get(v, 0) == 0 and w.shape(v) != 1
                   for v in w.rank_names):
                continue  # cannot cover the iteration space
            cm = None
            for env in enumerate_tile_shapes(pm, w):
                key = (dp.key(), _assignment_key(pm, env))
                if key in table:
                    continue
                if cm is None:
                    cm = curry(pm, w, a, objective, options)
                table[key] = evaluate_model(cm, env, a)

    violations: list[str] = []
    checked = 0
    for dp in dps:
        pm = canonical_unpruned_pm(dp, w)
        for env in enumerate_tile_shapes(pm, w):
            checked += 1
            raw = direct_evaluate(pm_to_tree(pm, env), w, a,
                                  objective, options)
            key = (dp.key(), _reduce_assignment(dp, pm, env, w, fault))
            hit = table.get(key)
            if hit is None:
                if len(violations) < 50:
                    violations.append(
                        f"{dp.key()} {env}: reduced form {key[1]} absent "
                        f"from the generated space")
                else:
                    violations.append("...")
                    return PruningReport(checked, len(table), violations)
                continue
            if hit.objective > raw.objective:
                violations.append(
                    f"{dp.key()} {env}: reduced objective {hit.objective} "
                    f"worse than original {raw.objective}")
            for lvl, u in hit.usage.items():
                if u > raw.usage[lvl]:
                    violations.append(
                        f"{dp.key()} {env}: reduced usage at {lvl} rose "
                        f"from {raw.usage[lvl]} to {u}")
    return PruningReport(checked, len(table), violations)
