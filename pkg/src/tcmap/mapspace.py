"""Mapping-space enumeration.

A mapping decomposes into three choices made in order: a dataplacement
(which storage nodes exist and how they interleave), a dataflow (which
loop goes in which slot, and slot-internal order), and tile shapes
(numeric loop bounds).  This module enumerates all three layers, both
the full space (for the brute-force oracle) and the reduced space that
keeps only loops that buy reuse.

A loop over v placed in the gap directly below a storage node holding
tensor t_hi and above one holding t_lo earns its place when iterating v
revisits t_hi's tile (v does not index t_hi) while each iteration needs
fresh data of t_lo (v indexes t_lo).  The check against t_hi is waived
under a backing node, the check against t_lo is waived directly above
compute.  A variable that only appears in a multi-term index of t_hi
(conv-style p in A[p+r]) passes the upper check as a window candidate:
sliding it keeps most of the tile resident, and which candidate sits
directly under the node is a real choice, so one dataflow per candidate
is emitted.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterator, Mapping, Optional

from .archspec import Arch
from .looptree import LoopNode, LoopTree, StorageNode
from .workload import FULL, NONE, PARTIAL, Workload, relevance, relevant_vars

# Test-only pipeline fault: apply the reuse-below requirement in the
# compute slot as well, as if the waiver were forgotten.
FAULT_STRICT_REUSE_BELOW = "strict_reuse_below"


@dataclass(frozen=True)
class Dataplacement:
    """Ordered storage nodes: the backing group (one node per tensor, in
    declaration order) followed by the chosen inner nodes."""

    nodes: tuple[StorageNode, ...]
    n_backing: int

    @property
    def inner(self) -> tuple[StorageNode, ...]:
        return self.nodes[self.n_backing:]

    @property
    def n_slots(self) -> int:
        # one loop gap under the backing group, one under each inner node
        return 1 + len(self.inner)

    def above_node(self, slot: int) -> StorageNode:
        if slot == 0:
            return self.nodes[self.n_backing - 1]
        return self.inner[slot - 1]

    def below_node(self, slot: int) -> Optional[StorageNode]:
        """Storage node directly below the slot; None for the compute slot."""
        if slot == self.n_slots - 1:
            return None
        return self.inner[slot]

    def is_compute_slot(self, slot: int) -> bool:
        return slot == self.n_slots - 1

    def key(self) -> str:
        return "".join(f"[{n.level}: {n.tensor}]" for n in self.nodes)


@dataclass(frozen=True)
class PMapping:
    """Partial mapping: a dataplacement plus per-slot ordered loop
    variables.  Bounds stay symbolic until tile shapes are chosen."""

    dp: Dataplacement
    slot_loops: tuple[tuple[str, ...], ...]  # top-to-bottom within each slot

    def loops(self) -> tuple[tuple[int, str, int], ...]:
        """(slot, var, tiling index) in tree order.  The lowest loop of a
        variable has index 0."""
        count: dict[str, int] = {}
        for vars_ in self.slot_loops:
            for v in vars_:
                count[v] = count.get(v, 0) + 1
        left = dict(count)
        out = []
        for s, vars_ in enumerate(self.slot_loops):
            for v in vars_:
                left[v] -= 1
                out.append((s, v, left[v]))
        return tuple(out)

    def var_counts(self) -> dict[str, int]:
        count: dict[str, int] = {}
        for vars_ in self.slot_loops:
            for v in vars_:
                count[v] = count.get(v, 0) + 1
        return count

    def symbols(self) -> tuple[str, ...]:
        return tuple(sym_name(v, i) for _, v, i in self.loops())

    def var_symbols(self) -> dict[str, tuple[str, ...]]:
        """Per variable, its bound symbols top-to-bottom."""
        out: dict[str, list[str]] = {}
        for _, v, i in self.loops():
            out.setdefault(v, []).append(sym_name(v, i))
        return {v: tuple(ss) for v, ss in out.items()}


def sym_name(var: str, index: int) -> str:
    # rank names are unique case-insensitively, so upper-casing is safe
    return f"{var.upper()}{index}"


def enumerate_dataplacements(w: Workload, a: Arch) -> list[Dataplacement]:
    """Backing nodes are mandatory; every allowed (inner level, tensor)
    node is optional, in every interleaving that keeps each tensor's own
    nodes in hierarchy order."""
    top = a.levels[0].name
    backing = tuple(StorageNode(top, t.name) for t in w.tensors)

    per_tensor_chains: list[list[tuple[StorageNode, ...]]] = []
    for t in w.tensors:
        allowed = []
        for lv in a.levels[1:]:
            if lv.keep is None or t.name in lv.keep:
                allowed.append(StorageNode(lv.name, t.name))
        chains = []
        for r in range(len(allowed) + 1):
            chains.extend(itertools.combinations(allowed, r))
        per_tensor_chains.append(chains)

    out: list[Dataplacement] = []

    def merge(chains: tuple[tuple[StorageNode, ...], ...],
              acc: tuple[StorageNode, ...]) -> None:
        if all(not c for c in chains):
            out.append(Dataplacement(backing + acc, len(backing)))
            return
        for i, c in enumerate(chains):
            if c:
                rest = chains[:i] + (c[1:],) + chains[i + 1:]
                merge(rest, acc + (c[0],))

    for combo in itertools.product(*per_tensor_chains):
        merge(tuple(combo), ())
    # Deterministic order: by inner node count, then by the node sequence.
    out.sort(key=lambda dp: (len(dp.inner),
                             tuple((n.level, n.tensor) for n in dp.inner)))
    return out


def helpful_vars(dp: Dataplacement, slot: int, w: Workload,
                 fault: Optional[str] = None
                 ) -> tuple[tuple[str, ...], tuple[str, ...]]:
    """Variables worth a loop in this slot, alphabetical, plus the subset
    that are window candidates of the tensor stored directly above."""
    above = dp.above_node(slot)
    above_is_backing = slot == 0
    below = dp.below_node(slot)

    helpful = []
    candidates = []
    for v in sorted(w.rank_names):
        if above_is_backing:
            above_ok, window = True, False
        else:
            rel_hi = relevance(w.tensor(above.tensor), v)
            above_ok = rel_hi != FULL
            window = rel_hi == PARTIAL
        if below is None:
            below_ok = fault != FAULT_STRICT_REUSE_BELOW
        else:
            below_ok = relevance(w.tensor(below.tensor), v) != NONE
        if above_ok and below_ok:
            helpful.append(v)
            if window:
                candidates.append(v)
    return tuple(helpful), tuple(candidates)


def generate_dataflows(dp: Dataplacement, w: Workload,
                       fault: Optional[str] = None) -> list[PMapping]:
    """One loop per helpful variable per slot.  Slot-internal order is
    alphabetical except that each window candidate may be hoisted
    directly under the node above, one dataflow variant per candidate."""
    per_slot: list[list[tuple[str, ...]]] = []
    for s in range(dp.n_slots):
        helpful, candidates = helpful_vars(dp, s, w, fault)
        if candidates:
            orders = [(c,) + tuple(v for v in helpful if v != c)
                      for c in candidates]
        else:
            orders = [helpful]
        per_slot.append(orders)
    return [PMapping(dp, combo) for combo in itertools.product(*per_slot)]


def unpruned_dataflows(dp: Dataplacement, w: Workload) -> Iterator[PMapping]:
    """Every per-slot permutation of one loop per rank variable."""
    vars_sorted = tuple(sorted(w.rank_names))
    per_slot = [list(itertools.permutations(vars_sorted))] * dp.n_slots
    for combo in itertools.product(*per_slot):
        yield PMapping(dp, tuple(combo))


def canonical_unpruned_pm(dp: Dataplacement, w: Workload) -> PMapping:
    vars_sorted = tuple(sorted(w.rank_names))
    return PMapping(dp, (vars_sorted,) * dp.n_slots)


def divisors(n: int) -> list[int]:
    out = [d for d in range(1, n + 1) if n % d == 0]
    return out


def ordered_factorizations(n: int, parts: int) -> list[tuple[int, ...]]:
    """All tuples of `parts` positive integers whose product is n, in
    lexicographic order.  Tuple order is outermost loop first."""
    if parts == 0:
        return [()] if n == 1 else []
    if parts == 1:
        return [(n,)]
    out = []
    for d in divisors(n):
        for rest in ordered_factorizations(n // d, parts - 1):
            out.append((d,) + rest)
    return out


def count_factorizations(n: int, parts: int) -> int:
    """Number of ordered factorizations of n into `parts` positive
    factors: a product of C(e+parts-1, parts-1) over prime exponents e."""
    if parts == 0:
        return 1 if n == 1 else 0
    out = 1
    rem = n
    p = 2
    while p * p <= rem:
        if rem % p == 0:
            e = 0
            while rem % p == 0:
                rem //= p
                e += 1
            out *= math.comb(e + parts - 1, parts - 1)
        p += 1
    if rem > 1:
        out *= math.comb(1 + parts - 1, parts - 1)
    return out


def enumerate_tile_shapes(pm: PMapping, w: Workload) -> Iterator[dict[str, int]]:
    """Yield symbol->bound maps covering every perfect factorization of
    each rank shape over that variable's loops, in deterministic order
    (variables alphabetical, factor tuples lexicographic)."""
    var_syms = pm.var_symbols()
    vars_sorted = sorted(var_syms)
    domains = [ordered_factorizations(w.shape(v), len(var_syms[v]))
               for v in vars_sorted]
    for vc in w.rank_names:
        if vc not in var_syms and w.shape(vc) != 1:
            return  # a shape > 1 variable with no loop: nothing to yield
    for combo in itertools.product(*domains):
        bounds: dict[str, int] = {}
        for v, tup in zip(vars_sorted, combo):
            for s, b in zip(var_syms[v], tup):
                bounds[s] = b
        yield bounds


def count_tile_shapes(pm: PMapping, w: Workload) -> int:
    var_counts = pm.var_counts()
    out = 1
    for v in w.rank_names:
        out *= count_factorizations(w.shape(v), var_counts.get(v, 0))
    return out


def pm_to_tree(pm: PMapping, bounds: Mapping[str, int]) -> LoopTree:
    nodes: list = []
    loops = pm.loops()
    pos = 0
    dp = pm.dp
    nodes.extend(dp.nodes[:dp.n_backing])
    for s in range(dp.n_slots):
        for slot, v, i in loops[pos:]:
            if slot != s:
                break
            nodes.append(LoopNode(v, i, int(bounds[sym_name(v, i)])))
            pos += 1
        if s < dp.n_slots - 1:
            nodes.append(dp.inner[s])
    return LoopTree(tuple(nodes))


@dataclass
class MapspaceStats:
    num_dp: int = 0
    num_df_raw: int = 0
    num_df_pruned: int = 0
    num_ts_raw: int = 0
    num_ts_pruned: int = 0
    product_raw: int = 0
    product_pruned: int = 0
    num_evaluated: int = 0

    def as_strings(self) -> dict[str, str]:
        return {
            "num_dp": str(self.num_dp),
            "num_df_raw": str(self.num_df_raw),
            "num_df_pruned": str(self.num_df_pruned),
            "num_ts_raw": str(self.num_ts_raw),
            "num_ts_pruned": str(self.num_ts_pruned),
            "product_raw": str(self.product_raw),
            "product_pruned": str(self.product_pruned),
        }


def count_mapspace(w: Workload, a: Arch) -> MapspaceStats:
    """Exact sizes of the full and reduced spaces.  The df and ts fields
    are sums over dataplacements; the products are true mapping counts
    sum_dp |DF(dp)| * |TS(dp)|."""
    stats = MapspaceStats()
    n_vars = len(w.rank_names)
    perm = math.factorial(n_vars)
    for dp in enumerate_dataplacements(w, a):
        stats.num_dp += 1
        u = dp.n_slots
        df_raw = perm ** u
        ts_raw = 1
        for v in w.rank_names:
            ts_raw *= count_factorizations(w.shape(v), u)
        dfs = generate_dataflows(dp, w)
        df_pruned = len(dfs)
        # the tile-shape space depends only on per-variable loop counts,
        # which all variants of one dataplacement share
        ts_pruned = count_tile_shapes(dfs[0], w) if dfs else 0
        stats.num_df_raw += df_raw
        stats.num_df_pruned += df_pruned
        stats.num_ts_raw += ts_raw
        stats.num_ts_pruned += ts_pruned
        stats.product_raw += df_raw * ts_raw
        stats.product_pruned += df_pruned * ts_pruned
    return stats
