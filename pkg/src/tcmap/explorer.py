"""Tile-shape search with dominance pruning.

Tile bounds are fixed one loop at a time (variables alphabetical, each
variable's loops innermost first, the outermost loop forced to whatever
factor remains).  Two partial assignments are comparable when they leave
identical residual factors for every variable: any completion of one is
then a completion of the other.  For comparable partials we extract,
from every cost expression, the maximal subexpressions whose symbols are
all fixed; each becomes one comparison criterion.  Costs compose from
those pieces through +, *, max, min and division by positive constants,
all monotone, so a partial that is no worse on every criterion leads to
a final cost no worse under any shared completion: worse partials are
dropped.  A partial whose usage already exceeds a capacity with every
open bound at its minimum of 1 can never become valid and is dropped
too.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

from . import symexpr as se
from .archspec import Arch
from .looptree import LoopTree, serialize
from .mapspace import (MapspaceStats, PMapping, divisors,
                       enumerate_dataplacements, generate_dataflows,
                       pm_to_tree)
from .model import CurriedModel, Metrics, ModelOptions, curry, evaluate_model
from .workload import Workload


def collect_criteria(e: se.Expr, known: frozenset[str]) -> list[se.Expr]:
    """Maximal subexpressions of e over fixed symbols, each a monotone
    contribution to e under any assignment of the open symbols."""
    syms = se.symbols_of(e)
    if not syms:
        return []
    if syms <= known:
        return [e]
    if not (syms & known):
        return []
    if isinstance(e, (se.Sum, se.Max, se.Min)):
        out: list[se.Expr] = []
        for t in e.terms:
            out.extend(collect_criteria(t, known))
        return out
    if isinstance(e, se.Prod):
        out = []
        fixed = []
        for f in e.factors:
            fs = se.symbols_of(f)
            if fs and fs <= known:
                fixed.append(f)
            elif fs & known:
                out.extend(collect_criteria(f, known))
        if fixed:
            out.insert(0, se.prod_of(fixed))
        return out
    if isinstance(e, (se.DivC, se.CeilDiv)):
        return collect_criteria(e.num, known)
    return []


def _strip_constants(e: se.Expr) -> Optional[se.Expr]:
    # scaling and shifting by constants cannot flip a <= comparison
    if isinstance(e, se.Prod):
        fs = [f for f in e.factors if not isinstance(f, se.Const)]
        return se.prod_of(fs) if fs else None
    if isinstance(e, se.Sum):
        ts = [t for t in e.terms if not isinstance(t, se.Const)]
        return se.sum_of(ts) if ts else None
    if isinstance(e, se.Const):
        return None
    return e


def derive_criteria(cm: CurriedModel, a: Arch,
                    known: frozenset[str]) -> list[se.Expr]:
    roots = [cm.objective_expr, cm.latency, cm.energy]
    roots += [cm.usage[m.name] for m in a.levels if m.capacity is not None]
    out: list[se.Expr] = []
    seen = set()
    for r in roots:
        for c in collect_criteria(r, known):
            c = _strip_constants(c)
            if c is None:
                continue
            k = se._key(c)
            if k not in seen:
                seen.add(k)
                out.append(c)
    out.sort(key=se._key)
    return out


@dataclass(frozen=True)
class Partial:
    env: dict[str, int]
    residual: tuple[int, ...]  # per variable, alphabetical


@dataclass
class PruneEvent:
    kind: str  # "dominated" or "capacity"
    step: int
    known: tuple[str, ...]
    pruned_env: dict[str, int]
    pruned_residual: tuple[int, ...]
    dominator_env: Optional[dict[str, int]] = None
    level: Optional[str] = None
    usage_floor: Optional[int] = None
    capacity: Optional[int] = None


@dataclass
class ExploreResult:
    best: Optional[tuple[Metrics, dict[str, int]]]
    num_evaluated: int
    num_leaves: int
    frontier_peak: int
    pruned_dominated: int
    pruned_capacity: int
    events: list[PruneEvent] = field(default_factory=list)


def _steps(cm: CurriedModel) -> list[tuple[str, str, bool]]:
    """(var, symbol, forced) in visit order."""
    out = []
    for v in sorted(cm.var_symbols):
        syms = cm.var_symbols[v]  # top-to-bottom
        inner_first = tuple(reversed(syms))
        for i, s in enumerate(inner_first):
            out.append((v, s, i == len(inner_first) - 1))
    return out


def explore_tile_shapes(cm: CurriedModel, w: Workload, a: Arch,
                        prune: bool = True,
                        audit: bool = False) -> ExploreResult:
    vars_sorted = sorted(cm.var_symbols)
    var_pos = {v: i for i, v in enumerate(vars_sorted)}
    steps = _steps(cm)
    bounded = [(m.name, m.capacity) for m in a.levels if m.capacity is not None]

    res = ExploreResult(best=None, num_evaluated=0, num_leaves=0,
                        frontier_peak=1, pruned_dominated=0,
                        pruned_capacity=0)
    for v in w.rank_names:
        if v not in cm.var_symbols and w.shape(v) != 1:
            return res  # an uncovered variable leaves no full mapping

    start_res = tuple(w.shape(v) for v in vars_sorted)
    frontier: list[Partial] = [Partial({}, start_res)]
    known: set[str] = set()

    for stepno, (v, sym, forced) in enumerate(steps):
        known.add(sym)
        vi = var_pos[v]
        grown: list[Partial] = []
        for p in frontier:
            rem = p.residual[vi]
            choices = [rem] if forced else divisors(rem)
            for d in choices:
                env2 = dict(p.env)
                env2[sym] = d
                r2 = list(p.residual)
                r2[vi] = rem // d
                grown.append(Partial(env2, tuple(r2)))

        if prune:
            grown = _capacity_prune(grown, cm, bounded, known, stepno,
                                    audit, res)
            grown = _dominance_prune(grown, cm, a, known, stepno, audit, res)

        frontier = grown
        if len(frontier) > res.frontier_peak:
            res.frontier_peak = len(frontier)

    best: Optional[tuple[Metrics, dict[str, int], str]] = None
    for p in frontier:
        res.num_leaves += 1
        m = evaluate_model(cm, p.env, a)
        res.num_evaluated += 1
        if not m.valid:
            continue
        if best is None or m.objective < best[0].objective:
            best = (m, p.env, "")
        elif m.objective == best[0].objective:
            # exact tie: the lexicographically smaller rendering wins
            cur = serialize(pm_to_tree(cm.pm, p.env))
            ref = best[2] or serialize(pm_to_tree(cm.pm, best[1]))
            if cur < ref:
                best = (m, p.env, cur)
            else:
                best = (best[0], best[1], ref)
    res.best = (best[0], best[1]) if best else None
    return res


def _capacity_prune(grown: list[Partial], cm: CurriedModel,
                    bounded: list[tuple[str, Optional[int]]],
                    known: set[str], stepno: int, audit: bool,
                    res: ExploreResult) -> list[Partial]:
    if not bounded:
        return grown
    keep = []
    all_syms = cm.symbols
    for p in grown:
        floor_env = {s: p.env.get(s, 1) for s in all_syms}
        bad = None
        for name, cap in bounded:
            u = se.evaluate(cm.usage[name], floor_env)
            if u > cap:
                bad = (name, u, cap)
                break
        if bad is None:
            keep.append(p)
        else:
            res.pruned_capacity += 1
            if audit:
                res.events.append(PruneEvent(
                    kind="capacity", step=stepno, known=tuple(sorted(known)),
                    pruned_env=dict(p.env), pruned_residual=p.residual,
                    level=bad[0], usage_floor=int(bad[1]), capacity=bad[2]))
    return keep


def _dominance_prune(grown: list[Partial], cm: CurriedModel, a: Arch,
                     known: set[str], stepno: int, audit: bool,
                     res: ExploreResult) -> list[Partial]:
    criteria = derive_criteria(cm, a, frozenset(known))
    groups: dict[tuple[int, ...], list[tuple[Partial, tuple]]] = {}
    order: list[tuple[int, ...]] = []
    for p in grown:
        vec = tuple(se.evaluate(c, p.env) for c in criteria)
        if p.residual not in groups:
            groups[p.residual] = []
            order.append(p.residual)
        groups[p.residual].append((p, vec))

    keep: list[Partial] = []
    for rkey in order:
        group = groups[rkey]
        alive = []
        for i, (p, v) in enumerate(group):
            dead = False
            for j, (q, u) in enumerate(group):
                if i == j:
                    continue
                if all(x <= y for x, y in zip(u, v)) and (u != v or j < i):
                    dead = True
                    break
            if not dead:
                alive.append((i, p, v))
                keep.append(p)
        if len(alive) < len(group):
            survivors = {i for i, _, _ in alive}
            for i, (p, v) in enumerate(group):
                if i in survivors:
                    continue
                res.pruned_dominated += 1
                if audit:
                    # a surviving dominator always exists: domination
                    # chains are finite and end at a kept element
                    dom = next(q for j, q, u in alive
                               if all(x <= y for x, y in zip(u, v))
                               and (u != v or j < i))
                    res.events.append(PruneEvent(
                        kind="dominated", step=stepno,
                        known=tuple(sorted(known)),
                        pruned_env=dict(p.env), pruned_residual=p.residual,
                        dominator_env=dict(dom.env)))
    return keep


def verify_audit(cm: CurriedModel, a: Arch,
                 events: list[PruneEvent]) -> list[str]:
    """Recheck every recorded prune from scratch; returns violations."""
    bad = []
    for ev in events:
        known = frozenset(ev.known)
        if ev.kind == "capacity":
            floor_env = {s: ev.pruned_env.get(s, 1) for s in cm.symbols}
            u = se.evaluate(cm.usage[ev.level], floor_env)
            if not (u > ev.capacity):
                bad.append(f"capacity prune at step {ev.step} unjustified: "
                           f"usage floor {u} <= {ev.capacity}")
            continue
        dom = ev.dominator_env
        if set(dom) != set(ev.pruned_env):
            bad.append(f"step {ev.step}: dominator binds different symbols")
            continue
        criteria = derive_criteria(cm, a, known)
        for c in criteria:
            cd = se.evaluate(c, dom)
            cp = se.evaluate(c, ev.pruned_env)
            if cd > cp:
                bad.append(f"step {ev.step}: dominator worse on {se.to_text(c)}"
                           f" ({cd} > {cp})")
                break
    return bad


@dataclass
class SearchReport:
    objective: str
    best_metrics: Optional[Metrics]
    best_pm: Optional[PMapping]
    best_bounds: Optional[dict[str, int]]
    best_tree: Optional[LoopTree]
    stats: MapspaceStats
    wall_time_ms: float


def _search_one(args) -> tuple[Optional[tuple], int, int]:
    pm, w, a, objective, options = args
    cm = curry(pm, w, a, objective, options)
    r = explore_tile_shapes(cm, w, a, prune=True)
    if r.best is None:
        return None, r.num_evaluated, r.num_leaves
    m, env = r.best
    return (m, pm, env), r.num_evaluated, r.num_leaves


def search_all(w: Workload, a: Arch, objective: str = "edp",
               threads: int = 1,
               options: ModelOptions = ModelOptions()) -> SearchReport:
    """Search the reduced mapping space exhaustively (modulo dominance)
    and return the best valid mapping.  Deterministic for any thread
    count: results are reduced in task submission order."""
    t0 = time.perf_counter()
    stats = MapspaceStats()
    tasks = []
    for dp in enumerate_dataplacements(w, a):
        stats.num_dp += 1
        for pm in generate_dataflows(dp, w):
            stats.num_df_pruned += 1
            tasks.append((pm, w, a, objective, options))

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            results = list(ex.map(_search_one, tasks))
    else:
        results = [_search_one(t) for t in tasks]

    best: Optional[tuple[Metrics, PMapping, dict[str, int]]] = None
    best_key: Optional[tuple] = None
    for found, n_eval, _leaves in results:
        stats.num_evaluated += n_eval
        if found is None:
            continue
        m, pm, env = found
        key = (m.objective, serialize(pm_to_tree(pm, env)))
        if best_key is None or key < best_key:
            best = (m, pm, env)
            best_key = key

    wall = (time.perf_counter() - t0) * 1000.0
    if best is None:
        return SearchReport(objective, None, None, None, None, stats, wall)
    m, pm, env = best
    return SearchReport(objective, m, pm, env, pm_to_tree(pm, env),
                        stats, wall)
