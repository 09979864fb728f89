"""Mapping IR: a linear nest of storage and loop nodes over one Einsum.

A tree is read top to bottom.  Storage nodes pin a tile of one tensor at
one memory level; the loops below a storage node shape its tile, the
temporal loops above it decide how many times the tile is refetched.
The innermost element is always the compute point, written explicitly in
the text form:

    [DRAM: A]
    [DRAM: B]
    [DRAM: Z]
    for m1 in 2
    [GLB: A]
    for k0 in 4
    compute

Spatial loops (`par-for`) sit contiguously directly above compute.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Union

from .archspec import Arch
from .workload import NONE, Workload, extent_of, relevance, relevant_vars


@dataclass(frozen=True)
class StorageNode:
    level: str
    tensor: str


@dataclass(frozen=True)
class LoopNode:
    var: str
    index: int  # tiling level of this variable, 0 = innermost
    bound: int
    spatial: bool = False


TreeNode = Union[StorageNode, LoopNode]


@dataclass(frozen=True)
class LoopTree:
    nodes: tuple[TreeNode, ...]

    def storage(self) -> tuple[StorageNode, ...]:
        return tuple(n for n in self.nodes if isinstance(n, StorageNode))

    def loops(self) -> tuple[LoopNode, ...]:
        return tuple(n for n in self.nodes if isinstance(n, LoopNode))

    def position(self, node: TreeNode) -> int:
        return self.nodes.index(node)


class ParseError(ValueError):
    pass


def loops_above(tree: LoopTree, node: StorageNode) -> tuple[LoopNode, ...]:
    pos = tree.position(node)
    return tuple(n for n in tree.nodes[:pos] if isinstance(n, LoopNode))


def loops_below(tree: LoopTree, node: StorageNode) -> tuple[LoopNode, ...]:
    pos = tree.position(node)
    return tuple(n for n in tree.nodes[pos + 1:] if isinstance(n, LoopNode))


def var_extent_below(tree: LoopTree, node: StorageNode, var: str) -> int:
    out = 1
    for l in loops_below(tree, node):
        if l.var == var:
            out *= l.bound
    return out


def tiles_fetched(tree: LoopTree, node: StorageNode) -> int:
    """Times the node's tile is (re)filled: product of temporal bounds
    above it.  Spatial loops never advance, so they are excluded."""
    out = 1
    for l in loops_above(tree, node):
        if not l.spatial:
            out *= l.bound
    return out


def tile_shape_at(tree: LoopTree, w: Workload, node: StorageNode
                  ) -> tuple[tuple[int, ...], int]:
    """Per-dim coordinate extents of the tile held at `node`, and its
    size in words."""
    t = w.tensor(node.tensor)
    extents = {v: var_extent_below(tree, node, v) for v in w.rank_names}
    dims = tuple(extent_of(d, extents) for d in t.dims)
    words = 1
    for d in dims:
        words *= d
    return dims, words


def accesses_to_above(tree: LoopTree, w: Workload, node: StorageNode) -> int:
    _, words = tile_shape_at(tree, w, node)
    return words * tiles_fetched(tree, node)


def parent_storage(tree: LoopTree, node: StorageNode) -> StorageNode | None:
    """Nearest storage node above holding the same tensor."""
    pos = tree.position(node)
    for n in reversed(tree.nodes[:pos]):
        if isinstance(n, StorageNode) and n.tensor == node.tensor:
            return n
    return None


def validate(tree: LoopTree, w: Workload, a: Arch) -> list[str]:
    """Structural checks. Returns human-readable violations, empty if ok."""
    bad: list[str] = []
    level_names = [lv.name for lv in a.levels]
    top = level_names[0]

    storage = tree.storage()
    seen_nodes = set()
    for s in storage:
        if s.level not in level_names:
            bad.append(f"unknown memory level {s.level!r}")
            continue
        try:
            w.tensor(s.tensor)
        except KeyError:
            bad.append(f"unknown tensor {s.tensor!r}")
            continue
        if (s.level, s.tensor) in seen_nodes:
            bad.append(f"duplicate storage node [{s.level}: {s.tensor}]")
        seen_nodes.add((s.level, s.tensor))
        lv = a.level(s.level)
        if lv.keep is not None and s.tensor not in lv.keep:
            bad.append(f"level {s.level} may not store {s.tensor}")

    for t in w.tensors:
        chain = [s for s in storage if s.tensor == t.name]
        if not chain or chain[0].level != top:
            bad.append(f"tensor {t.name} has no backing node at {top}")
        idxs = [level_names.index(s.level) for s in chain if s.level in level_names]
        if any(b <= a_ for a_, b in zip(idxs, idxs[1:])):
            bad.append(f"tensor {t.name}: storage nodes out of hierarchy order")

    # No loop above a backing node.
    for s in storage:
        if s.level == top and loops_above(tree, s):
            bad.append(f"loops above backing node [{s.level}: {s.tensor}]")

    # Loop bookkeeping: declared vars, positive bounds, index numbering,
    # full coverage of every rank shape.
    per_var: dict[str, list[LoopNode]] = {}
    for l in tree.loops():
        if l.var not in w.rank_names:
            bad.append(f"loop over undeclared variable {l.var!r}")
            continue
        if l.bound < 1:
            bad.append(f"loop {l.var}{l.index}: bound must be >= 1")
        per_var.setdefault(l.var, []).append(l)
    for v, ls in per_var.items():
        prod = 1
        for l in ls:
            prod *= l.bound
        if prod != w.shape(v):
            bad.append(f"bounds of {v} multiply to {prod}, shape is {w.shape(v)}")
        want = list(range(len(ls) - 1, -1, -1))
        if [l.index for l in ls] != want:
            bad.append(f"{v} loop indices are not {want} top to bottom")
    for v in w.rank_names:
        if v not in per_var and w.shape(v) != 1:
            bad.append(f"no loop covers {v} (shape {w.shape(v)})")

    # Spatial loops form a contiguous suffix directly above compute.
    tail_spatial = True
    for n in reversed(tree.nodes):
        if isinstance(n, LoopNode) and n.spatial:
            if not tail_spatial:
                bad.append("spatial loops must sit directly above compute")
                break
        else:
            tail_spatial = False
    return bad


def check_dataplacement_invariants(tree: LoopTree, w: Workload) -> list[str]:
    """Lifetime and shape invariants between every pair of storage nodes.

    Higher nodes live at least as long (their refetch count divides the
    lower node's), and along ranks shared by the two stored tensors the
    higher tile is at least as large.
    """
    bad: list[str] = []
    storage = tree.storage()
    for i, hi in enumerate(storage):
        for lo in storage[i + 1:]:
            f_hi = tiles_fetched(tree, hi)
            f_lo = tiles_fetched(tree, lo)
            if f_hi > f_lo or f_lo % f_hi != 0:
                bad.append(
                    f"[{hi.level}: {hi.tensor}] refetched {f_hi}x does not "
                    f"divide [{lo.level}: {lo.tensor}] refetched {f_lo}x")
            hi_vars = set(relevant_vars(w.tensor(hi.tensor)))
            lo_vars = set(relevant_vars(w.tensor(lo.tensor)))
            for v in sorted(hi_vars & lo_vars):
                e_hi = var_extent_below(tree, hi, v)
                e_lo = var_extent_below(tree, lo, v)
                if e_hi < e_lo:
                    bad.append(
                        f"{v} extent {e_hi} below [{hi.level}: {hi.tensor}] "
                        f"smaller than {e_lo} below [{lo.level}: {lo.tensor}]")
    return bad


def serialize(tree: LoopTree) -> str:
    lines = []
    for n in tree.nodes:
        if isinstance(n, StorageNode):
            lines.append(f"[{n.level}: {n.tensor}]")
        else:
            kw = "par-for" if n.spatial else "for"
            lines.append(f"{kw} {n.var}{n.index} in {n.bound}")
    lines.append("compute")
    return "\n".join(lines)


_STORAGE_RE = re.compile(r"^\[\s*([^:\]]+?)\s*:\s*([^:\]]+?)\s*\]$")
_LOOP_RE = re.compile(r"^(par-for|for)\s+(\S+)\s+in\s+(\S+)$")


def _split_loop_token(tok: str, w: Workload) -> tuple[str, int]:
    # Longest declared variable name that prefixes the token and leaves
    # a decimal tiling index.
    best = None
    for v in w.rank_names:
        if tok.startswith(v) and tok[len(v):].isdigit():
            if best is None or len(v) > len(best):
                best = v
    if best is None:
        raise ValueError(tok)
    return best, int(tok[len(best):])


def parse_tree(text: str, w: Workload, a: Arch) -> LoopTree:
    nodes: list[TreeNode] = []
    saw_compute = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if saw_compute:
            raise ParseError(f"line {lineno}: content after compute")
        if line == "compute":
            saw_compute = True
            continue
        m = _STORAGE_RE.match(line)
        if m:
            nodes.append(StorageNode(m.group(1), m.group(2)))
            continue
        m = _LOOP_RE.match(line)
        if m:
            try:
                var, index = _split_loop_token(m.group(2), w)
            except ValueError:
                raise ParseError(
                    f"line {lineno}: cannot read loop variable {m.group(2)!r}"
                ) from None
            try:
                bound = int(m.group(3))
            except ValueError:
                raise ParseError(f"line {lineno}: bad bound {m.group(3)!r}") from None
            nodes.append(LoopNode(var, index, bound, m.group(1) == "par-for"))
            continue
        raise ParseError(f"line {lineno}: cannot parse {line!r}")
    if not saw_compute:
        raise ParseError("missing compute terminal")
    tree = LoopTree(tuple(nodes))
    bad = validate(tree, w, a)
    if bad:
        raise ParseError("; ".join(bad))
    return tree
