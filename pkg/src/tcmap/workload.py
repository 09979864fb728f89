"""Single-Einsum workload description.

A workload is a set of rank variables with integer shapes plus a list of
tensors whose dimensions are indexed by sums of rank variables (unit
stride, unit coefficients).  `m` in `A[m, k]` is fully relevant to A;
`p` in `A[p + r]` is partially relevant, which is what produces halo
overlap between neighboring tiles.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping


class ConfigError(ValueError):
    """Raised for malformed workload or architecture descriptions."""


@dataclass(frozen=True)
class IndexExpr:
    """Sum of distinct rank variables, e.g. (p, r) for p + r."""

    terms: tuple[str, ...]

    def __str__(self) -> str:
        return " + ".join(self.terms)


@dataclass(frozen=True)
class TensorSpec:
    name: str
    role: str  # "input" or "output"
    dims: tuple[IndexExpr, ...]


@dataclass(frozen=True)
class Workload:
    ranks: tuple[tuple[str, int], ...]  # declaration order
    tensors: tuple[TensorSpec, ...]  # declaration order

    @property
    def rank_names(self) -> tuple[str, ...]:
        return tuple(n for n, _ in self.ranks)

    def shape(self, var: str) -> int:
        for n, s in self.ranks:
            if n == var:
                return s
        raise KeyError(var)

    def tensor(self, name: str) -> TensorSpec:
        for t in self.tensors:
            if t.name == name:
                return t
        raise KeyError(name)

    def computes(self) -> int:
        out = 1
        for _, s in self.ranks:
            out *= s
        return out

    def output(self) -> TensorSpec:
        return next(t for t in self.tensors if t.role == "output")


FULL = "full"
PARTIAL = "partial"
NONE = "none"


def relevance(tensor: TensorSpec, var: str) -> str:
    """full if var is the sole term of some dim, partial if it only
    appears inside multi-term dims, none otherwise."""
    seen = False
    for dim in tensor.dims:
        if var in dim.terms:
            if len(dim.terms) == 1:
                return FULL
            seen = True
    return PARTIAL if seen else NONE


def relevant_vars(tensor: TensorSpec) -> tuple[str, ...]:
    out = []
    for dim in tensor.dims:
        for v in dim.terms:
            if v not in out:
                out.append(v)
    return tuple(out)


def extent_of(expr: IndexExpr, extents: Mapping[str, int]) -> int:
    """Coordinate extent spanned along one dim when each variable covers
    `extents[var]` consecutive values.  For a sum of variables the windows
    overlap, giving sum(e_t - 1) + 1 distinct coordinates."""
    out = 1
    for v in expr.terms:
        out += extents.get(v, 1) - 1
    return out


def tensor_size(w: Workload, tensor: TensorSpec) -> int:
    full = {v: w.shape(v) for v in w.rank_names}
    words = 1
    for dim in tensor.dims:
        words *= extent_of(dim, full)
    return words


def parse_index_expr(text: str, declared: Iterable[str]) -> IndexExpr:
    terms = tuple(t.strip() for t in str(text).split("+"))
    if not terms or any(not t for t in terms):
        raise ConfigError(f"bad index expression {text!r}")
    declared = set(declared)
    for t in terms:
        if t not in declared:
            raise ConfigError(f"unknown rank variable {t!r} in {text!r}")
    if len(set(terms)) != len(terms):
        raise ConfigError(f"repeated rank variable in {text!r}")
    return IndexExpr(terms)


def parse_workload(data: Mapping) -> Workload:
    try:
        ranks_raw = data["ranks"]
        tensors_raw = data["tensors"]
    except KeyError as k:
        raise ConfigError(f"workload is missing section {k}") from None

    ranks: list[tuple[str, int]] = []
    for name, shape in ranks_raw.items():
        name = str(name)
        if not isinstance(shape, int) or shape < 1:
            raise ConfigError(f"rank {name!r} needs a positive integer shape")
        ranks.append((name, shape))
    names = [n for n, _ in ranks]
    if len(set(names)) != len(names):
        raise ConfigError("duplicate rank variable names")
    lowered = [n.lower() for n in names]
    if len(set(lowered)) != len(lowered):
        raise ConfigError("rank variable names must differ case-insensitively")

    tensors: list[TensorSpec] = []
    for t in tensors_raw:
        try:
            tname = str(t["name"])
            role = str(t["role"])
            dims_raw = t["dims"]
        except (KeyError, TypeError):
            raise ConfigError(f"bad tensor entry {t!r}") from None
        if role not in ("input", "output"):
            raise ConfigError(f"tensor {tname!r}: role must be input or output")
        dims = tuple(parse_index_expr(d, names) for d in dims_raw)
        if not dims:
            raise ConfigError(f"tensor {tname!r} has no dims")
        tensors.append(TensorSpec(tname, role, dims))

    tnames = [t.name for t in tensors]
    if len(set(tnames)) != len(tnames):
        raise ConfigError("duplicate tensor names")
    n_out = sum(1 for t in tensors if t.role == "output")
    if n_out != 1:
        raise ConfigError(f"need exactly one output tensor, got {n_out}")
    if not any(t.role == "input" for t in tensors):
        raise ConfigError("need at least one input tensor")

    used = set()
    for t in tensors:
        used.update(relevant_vars(t))
    unused = [n for n in names if n not in used]
    if unused:
        raise ConfigError(f"rank variables never used by any tensor: {unused}")

    return Workload(tuple(ranks), tuple(tensors))


def workload_to_dict(w: Workload) -> dict:
    return {
        "ranks": {n: s for n, s in w.ranks},
        "tensors": [
            {"name": t.name, "role": t.role, "dims": [str(d) for d in t.dims]}
            for t in w.tensors
        ],
    }
