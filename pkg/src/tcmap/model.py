"""Cost model.

Three independent evaluation paths over the same definitions:

* ``curry`` builds closed-form expressions in the tile-bound symbols of
  a partial mapping; ``evaluate_model`` plugs numbers into the compiled
  form (the hot path used by the search).
* ``direct_evaluate`` walks a concrete loop tree and computes the same
  quantities numerically, sharing no code with the symbolic path.
* ``trace_check`` simulates data movement word by word and compares the
  counts against ``direct_evaluate``.

Cost definitions: a storage node holds one tile of its tensor; the tile
is fetched anew for every assignment of the temporal loops above it, so
words exchanged with the parent node are tile size times fetch count.
Each transferred word is charged at both endpoints (read at the source,
write at the destination); for an input tensor data flows down, for the
output it drains up.  Compute reads its operands from the innermost
nodes free of charge.  A memory's latency is its total traffic divided
by its bandwidth, and mapping latency is the slowest memory or the
compute array, whichever is slower.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from . import symexpr as se
from .archspec import Arch
from .looptree import (LoopNode, LoopTree, StorageNode, loops_above,
                       loops_below, parent_storage, tiles_fetched,
                       var_extent_below)
from .mapspace import PMapping, sym_name
from .workload import PARTIAL, TensorSpec, Workload, extent_of, relevance

OBJECTIVES = ("edp", "energy", "latency")

Number = se.Number


class CapExceeded(RuntimeError):
    """A brute-force pass would exceed its configured work cap."""


@dataclass(frozen=True)
class ModelOptions:
    line_buffer: bool = False


@dataclass(frozen=True)
class Metrics:
    energy: Number
    latency: Number
    usage: dict[str, Number]
    accesses: dict[str, Number]
    valid: bool
    objective: Number


def objective_value(name: str, energy: Number, latency: Number) -> Number:
    if name == "edp":
        return energy * latency
    if name == "energy":
        return energy
    if name == "latency":
        return latency
    raise ValueError(f"unknown objective {name!r}")


@dataclass
class CurriedModel:
    pm: PMapping
    objective: str
    options: ModelOptions
    symbols: tuple[str, ...]
    var_symbols: dict[str, tuple[str, ...]]
    level_names: tuple[str, ...]
    tile_size: dict[StorageNode, se.Expr]
    usage_tile_size: dict[StorageNode, se.Expr]
    tiles_fetched: dict[StorageNode, se.Expr]
    node_accesses: dict[StorageNode, se.Expr]
    usage: dict[str, se.Expr]
    accesses: dict[str, se.Expr]
    level_latency: dict[str, se.Expr]
    compute_latency: se.Expr
    latency: se.Expr
    energy: se.Expr
    objective_expr: se.Expr
    tape: object = field(default=None, repr=False)

    def outputs(self) -> list[se.Expr]:
        """Expression vector the kernel evaluates per tile shape."""
        out = [self.usage[m] for m in self.level_names]
        out += [self.accesses[m] for m in self.level_names]
        out += [self.energy, self.latency, self.objective_expr]
        return out


def _slot_of_node(pm: PMapping, node: StorageNode) -> Optional[int]:
    """Index of the loop slot directly below the node, if any."""
    dp = pm.dp
    if node == dp.nodes[dp.n_backing - 1]:
        return 0
    for i, n in enumerate(dp.inner):
        if n == node:
            return i + 1
    return None


def _lb_excluded_symbol(pm: PMapping, node: StorageNode,
                        w: Workload) -> Optional[str]:
    """Bound symbol excluded from the node's usage window, when the loop
    directly below slides a partially-indexed variable."""
    slot = _slot_of_node(pm, node)
    if slot is None or not pm.slot_loops[slot]:
        return None
    v = pm.slot_loops[slot][0]
    if relevance(w.tensor(node.tensor), v) != PARTIAL:
        return None
    for s, var, i in pm.loops():
        if s == slot and var == v:
            return sym_name(var, i)
    return None


def _extent_expr(syms: tuple[str, ...], all_syms: tuple[str, ...],
                 shape: int) -> se.Expr:
    # a complete symbol set multiplies out to the full shape exactly
    if syms and set(syms) == set(all_syms):
        return se.const(shape)
    return se.prod_of([se.Sym(s) for s in syms])

def _dim_expr(expr_terms: tuple[str, ...],
              extents: dict[str, se.Expr]) -> se.Expr:
    parts = [extents.get(v, se.const(1)) for v in expr_terms]
    if len(parts) == 1:
        return parts[0]
    return se.sum_of(parts + [se.const(1 - len(parts))])


def _tile_size_expr(t: TensorSpec, extents: dict[str, se.Expr]) -> se.Expr:
    return se.prod_of([_dim_expr(d.terms, extents) for d in t.dims])


def curry(pm: PMapping, w: Workload, a: Arch, objective: str = "edp",
          options: ModelOptions = ModelOptions()) -> CurriedModel:
    """Close the model over a partial mapping, leaving the tile bounds
    as free symbols."""
    if objective not in OBJECTIVES:
        raise ValueError(f"unknown objective {objective!r}")
    dp = pm.dp
    loops = pm.loops()
    var_symbols = pm.var_symbols()

    def below_syms(v: str, min_slot: int) -> tuple[str, ...]:
        return tuple(sym_name(var, i) for s, var, i in loops
                     if var == v and s >= min_slot)

    # slot index from which a node sees only deeper loops
    node_floor: dict[StorageNode, int] = {}
    for n in dp.nodes[:dp.n_backing]:
        node_floor[n] = 0
    for i, n in enumerate(dp.inner):
        node_floor[n] = i + 1

    tile_size: dict[StorageNode, se.Expr] = {}
    usage_tile: dict[StorageNode, se.Expr] = {}
    fetched: dict[StorageNode, se.Expr] = {}
    node_acc: dict[StorageNode, se.Expr] = {}

    for node in dp.nodes:
        t = w.tensor(node.tensor)
        floor = node_floor[node]
        extents = {v: _extent_expr(below_syms(v, floor), var_symbols.get(v, ()),
                                   w.shape(v))
                   for v in w.rank_names}
        tile_size[node] = _tile_size_expr(t, extents)

        u_extents = extents
        if options.line_buffer:
            excl = _lb_excluded_symbol(pm, node, w)
            if excl is not None:
                v = next(var for s_, var, i in loops
                         if sym_name(var, i) == excl)
                syms = tuple(s for s in below_syms(v, floor) if s != excl)
                u_extents = dict(extents)
                u_extents[v] = se.prod_of([se.Sym(s) for s in syms])
        usage_tile[node] = _tile_size_expr(t, u_extents)

        above = tuple(sym_name(var, i) for s, var, i in loops if s < floor)
        fetched[node] = _extent_prod_all(above, var_symbols, w)
        node_acc[node] = se.prod_of([tile_size[node], fetched[node]])

    level_usage: dict[str, list[se.Expr]] = {m.name: [] for m in a.levels}
    level_acc: dict[str, list[se.Expr]] = {m.name: [] for m in a.levels}
    energy_terms: list[se.Expr] = []

    computes = w.computes()
    energy_terms.append(se.const(Fraction(computes) * a.compute.energy))

    for node in dp.nodes:
        level_usage[node.level].append(usage_tile[node])

    out_name = w.output().name
    for node in dp.inner:
        parent = _parent_of(dp, node)
        count = node_acc[node]
        level_acc[node.level].append(count)
        level_acc[parent.level].append(count)
        lv_self = a.level(node.level)
        lv_par = a.level(parent.level)
        if node.tensor == out_name:
            per_word = lv_self.read_energy + lv_par.write_energy
        else:
            per_word = lv_par.read_energy + lv_self.write_energy
        energy_terms.append(se.prod_of([count, se.const(per_word)]))

    usage = {m: se.sum_of(ts) for m, ts in level_usage.items()}
    accesses = {m: se.sum_of(ts) for m, ts in level_acc.items()}
    level_latency = {m.name: se.div_const(accesses[m.name], m.bandwidth)
                     for m in a.levels}
    spatial = 1  # generators emit temporal loops only
    compute_latency = se.div_const(se.const(computes), spatial)
    latency = se.max_of([compute_latency]
                        + [level_latency[m.name] for m in a.levels])
    energy = se.sum_of(energy_terms)
    if objective == "edp":
        obj = se.prod_of([energy, latency])
    elif objective == "energy":
        obj = energy
    else:
        obj = latency

    sym_var = {s: v for v, ss in var_symbols.items() for s in ss}
    vsets = {v: frozenset(ss) for v, ss in var_symbols.items()}
    shapes = {v: w.shape(v) for v in var_symbols}

    def fold(e: se.Expr) -> se.Expr:
        return _fold_symbols(e, sym_var, vsets, shapes)

    cm = CurriedModel(
        pm=pm, objective=objective, options=options,
        symbols=pm.symbols(), var_symbols=var_symbols,
        level_names=tuple(m.name for m in a.levels),
        tile_size={n: fold(e) for n, e in tile_size.items()},
        usage_tile_size={n: fold(e) for n, e in usage_tile.items()},
        tiles_fetched={n: fold(e) for n, e in fetched.items()},
        node_accesses={n: fold(e) for n, e in node_acc.items()},
        usage={m: fold(e) for m, e in usage.items()},
        accesses={m: fold(e) for m, e in accesses.items()},
        level_latency={m: fold(e) for m, e in level_latency.items()},
        compute_latency=compute_latency, latency=fold(latency),
        energy=fold(energy), objective_expr=fold(obj))
    from . import kernel
    cm.tape = kernel.compile_model(cm)
    return cm


def _fold_symbols(e: se.Expr, sym_var: dict[str, str],
                  var_syms: dict[str, frozenset[str]],
                  shapes: dict[str, int]) -> se.Expr:
    """Replace any product's complete per-variable symbol group with the
    variable's shape.  Exact wherever each variable's bounds multiply to
    its shape, which every enumerated tile shape satisfies."""
    if isinstance(e, se.Sym):
        v = sym_var[e.name]
        if len(var_syms[v]) == 1:
            return se.const(shapes[v])
        return e
    if isinstance(e, se.Prod):
        plain = [f for f in e.factors if isinstance(f, se.Sym)]
        out = [_fold_symbols(f, sym_var, var_syms, shapes)
               for f in e.factors if not isinstance(f, se.Sym)]
        by_var: dict[str, list] = {}
        for f in plain:
            by_var.setdefault(sym_var[f.name], []).append(f)
        for v, fs in by_var.items():
            names = {f.name for f in fs}
            if len(names) == len(fs) and names == var_syms[v]:
                out.append(se.const(shapes[v]))
            else:
                out.extend(fs)
        return se.prod_of(out)
    if isinstance(e, se.Sum):
        return se.sum_of([_fold_symbols(t, sym_var, var_syms, shapes)
                          for t in e.terms])
    if isinstance(e, se.Max):
        return se.max_of([_fold_symbols(t, sym_var, var_syms, shapes)
                          for t in e.terms])
    if isinstance(e, se.Min):
        return se.min_of([_fold_symbols(t, sym_var, var_syms, shapes)
                          for t in e.terms])
    if isinstance(e, se.DivC):
        return se.div_const(_fold_symbols(e.num, sym_var, var_syms, shapes),
                            e.den)
    if isinstance(e, se.CeilDiv):
        return se.ceil_div(_fold_symbols(e.num, sym_var, var_syms, shapes),
                           e.den)
    return e


def _extent_prod_all(syms: tuple[str, ...],
                     var_symbols: dict[str, tuple[str, ...]],
                     w: Workload) -> se.Expr:
    by_var: dict[str, list[str]] = {}
    for s in syms:
        for v, ss in var_symbols.items():
            if s in ss:
                by_var.setdefault(v, []).append(s)
                break
    factors = []
    for v, ss in sorted(by_var.items()):
        factors.append(_extent_expr(tuple(ss), var_symbols[v], w.shape(v)))
    return se.prod_of(factors)


def _parent_of(dp, node: StorageNode) -> StorageNode:
    idx = dp.nodes.index(node)
    for j in range(idx - 1, -1, -1):
        if dp.nodes[j].tensor == node.tensor:
            return dp.nodes[j]
    raise ValueError(f"no backing node above {node}")


def evaluate_model(cm: CurriedModel, bounds: dict[str, int],
                   a: Arch) -> Metrics:
    """Numeric evaluation of a curried model at one tile shape."""
    missing = set(cm.symbols) - set(bounds)
    extra = set(bounds) - set(cm.symbols)
    if missing or extra:
        raise ValueError(f"bad bindings: missing {sorted(missing)}, "
                         f"extra {sorted(extra)}")
    from . import kernel
    vals = kernel.run(cm.tape, [bounds[s] for s in cm.symbols])
    L = len(cm.level_names)
    usage = dict(zip(cm.level_names, vals[:L]))
    accesses = dict(zip(cm.level_names, vals[L:2 * L]))
    energy, latency, obj = vals[2 * L], vals[2 * L + 1], vals[2 * L + 2]
    valid = all(usage[m.name] <= m.capacity for m in a.levels
                if m.capacity is not None)
    return Metrics(energy=energy, latency=latency, usage=usage,
                   accesses=accesses, valid=valid, objective=obj)


def check_bounds(cm: CurriedModel, w: Workload,
                 bounds: dict[str, int]) -> None:
    for v, syms in cm.var_symbols.items():
        prod = 1
        for s in syms:
            prod *= bounds[s]
        if prod != w.shape(v):
            raise ValueError(f"bounds of {v} multiply to {prod}, "
                             f"shape is {w.shape(v)}")


# --- independent numeric path over concrete trees ----------------------


def _lb_direct_loop(tree: LoopTree, node: StorageNode,
                    w: Workload) -> Optional[LoopNode]:
    pos = tree.position(node)
    if pos + 1 < len(tree.nodes) and isinstance(tree.nodes[pos + 1], LoopNode):
        ln = tree.nodes[pos + 1]
        if relevance(w.tensor(node.tensor), ln.var) == PARTIAL:
            return ln
    return None


def direct_evaluate(tree: LoopTree, w: Workload, a: Arch,
                    objective: str = "edp",
                    options: ModelOptions = ModelOptions()) -> Metrics:
    """Evaluate a concrete loop tree without going through the symbolic
    machinery.  Used as a reference by the tests and the oracle."""
    if objective not in OBJECTIVES:
        raise ValueError(f"unknown objective {objective!r}")
    usage: dict[str, Number] = {m.name: 0 for m in a.levels}
    accesses: dict[str, Number] = {m.name: 0 for m in a.levels}

    tile_words: dict[StorageNode, int] = {}
    node_count: dict[StorageNode, int] = {}
    for node in tree.storage():
        t = w.tensor(node.tensor)
        extents = {v: var_extent_below(tree, node, v) for v in w.rank_names}
        tile_words[node] = _tile_words(t, extents)
        u_extents = extents
        if options.line_buffer:
            ln = _lb_direct_loop(tree, node, w)
            if ln is not None:
                u_extents = dict(extents)
                u_extents[ln.var] = extents[ln.var] // ln.bound
        usage[node.level] += _tile_words(t, u_extents)
        node_count[node] = tile_words[node] * tiles_fetched(tree, node)

    out_name = w.output().name
    energy = Fraction(w.computes()) * a.compute.energy
    for node in tree.storage():
        parent = parent_storage(tree, node)
        if parent is None:
            continue
        count = node_count[node]
        accesses[node.level] += count
        accesses[parent.level] += count
        lv_self = a.level(node.level)
        lv_par = a.level(parent.level)
        if node.tensor == out_name:
            per_word = lv_self.read_energy + lv_par.write_energy
        else:
            per_word = lv_par.read_energy + lv_self.write_energy
        energy += count * per_word

    spatial = 1
    for ln in tree.loops():
        if ln.spatial:
            spatial *= ln.bound
    latency: Number = _exact_div(w.computes(), spatial)
    for m in a.levels:
        latency = max(latency, _exact_div(accesses[m.name], m.bandwidth))

    valid = spatial <= a.compute.parallel_units
    for m in a.levels:
        if m.capacity is not None and usage[m.name] > m.capacity:
            valid = False
    energy = _as_int(energy)
    latency = _as_int(latency)
    return Metrics(energy=energy, latency=latency, usage=usage,
                   accesses=accesses, valid=valid,
                   objective=objective_value(objective, energy, latency))


def _tile_words(t: TensorSpec, extents: dict[str, int]) -> int:
    words = 1
    for d in t.dims:
        words *= extent_of(d, extents)
    return words


def _exact_div(num: Number, den: Number) -> Number:
    q = Fraction(num) / Fraction(den)
    return _as_int(q)


def _as_int(x: Number) -> Number:
    if isinstance(x, Fraction) and x.denominator == 1:
        return int(x)
    return x


# --- word-level trace --------------------------------------------------


@dataclass
class NodeTrace:
    node: StorageNode
    fills: int
    words_per_fill: int
    peak_words: int
    traffic: int


@dataclass
class TraceReport:
    ok: bool
    nodes: list[NodeTrace]
    mismatches: list[str]


def trace_check(tree: LoopTree, w: Workload, a: Arch,
                options: ModelOptions = ModelOptions(),
                cap: int = 65536) -> TraceReport:
    """Replay the mapping's data movement coordinate by coordinate and
    compare against the closed-form counts of ``direct_evaluate``."""
    if w.computes() > cap:
        raise CapExceeded(f"trace over {w.computes()} compute points "
                          f"exceeds cap {cap}")
    nodes_out: list[NodeTrace] = []
    mismatches: list[str] = []

    for node in tree.storage():
        t = w.tensor(node.tensor)
        above = [ln for ln in loops_above(tree, node) if not ln.spatial]
        fills = 0
        for _ in itertools.product(*[range(ln.bound) for ln in above]):
            fills += 1

        below = list(loops_below(tree, node))
        coords = _sweep_coords(t, below, None, None)
        words = len(coords)

        if options.line_buffer and _lb_direct_loop(tree, node, w) is not None:
            direct = _lb_direct_loop(tree, node, w)
            peak = 0
            for j in range(direct.bound):
                step = _sweep_coords(t, below, direct, j)
                peak = max(peak, len(step))
        else:
            peak = words

        traffic = fills * words
        nodes_out.append(NodeTrace(node, fills, words, peak, traffic))

    ref = direct_evaluate(tree, w, a, "edp", options)
    traced_acc: dict[str, int] = {m.name: 0 for m in a.levels}
    traced_use: dict[str, int] = {m.name: 0 for m in a.levels}
    for nt in nodes_out:
        parent = parent_storage(tree, nt.node)
        if parent is not None:
            traced_acc[nt.node.level] += nt.traffic
            traced_acc[parent.level] += nt.traffic
        traced_use[nt.node.level] += nt.peak_words
    for m in a.levels:
        if traced_acc[m.name] != ref.accesses[m.name]:
            mismatches.append(f"accesses at {m.name}: traced "
                              f"{traced_acc[m.name]}, model "
                              f"{ref.accesses[m.name]}")
        if traced_use[m.name] != ref.usage[m.name]:
            mismatches.append(f"usage at {m.name}: traced "
                              f"{traced_use[m.name]}, model "
                              f"{ref.usage[m.name]}")
    return TraceReport(ok=not mismatches, nodes=nodes_out,
                       mismatches=mismatches)


def _sweep_coords(t: TensorSpec, below: list[LoopNode],
                  fixed: Optional[LoopNode], fixed_val: Optional[int]) -> set:
    """Distinct coordinates of t touched by a full sweep of the given
    loops, optionally with one loop pinned."""
    # per-variable positional weights: a loop's step covers the extent of
    # the same variable's loops nested deeper
    weights: dict[int, int] = {}
    for i, ln in enumerate(below):
        wgt = 1
        for deeper in below[i + 1:]:
            if deeper.var == ln.var:
                wgt *= deeper.bound
        weights[i] = wgt
    coords = set()
    ranges = [range(ln.bound) if ln is not fixed else (fixed_val,)
              for ln in below]
    for combo in itertools.product(*ranges):
        vals: dict[str, int] = {}
        for i, ln in enumerate(below):
            vals[ln.var] = vals.get(ln.var, 0) + combo[i] * weights[i]
        point = tuple(sum(vals.get(v, 0) for v in d.terms) for d in t.dims)
        coords.add(point)
    return coords
