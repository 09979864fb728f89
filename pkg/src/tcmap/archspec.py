"""Memory hierarchy and compute description.

Levels are listed outermost first; the outermost level backs every
tensor in its entirety (capacity is usually unbounded there).  Energies
are pJ per word, bandwidth is words per cycle, and all of them are kept
as exact rationals so model comparisons never see floating point.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Optional

from .workload import ConfigError, Workload


def frac(x, what: str = "value") -> Fraction:
    """Exact rational from config input. Floats go through their decimal
    string form, so 0.5 means exactly 1/2."""
    try:
        if isinstance(x, (int, Fraction)):
            return Fraction(x)
        if isinstance(x, float):
            return Fraction(str(x))
        if isinstance(x, str):
            return Fraction(x.strip())
    except (ValueError, ZeroDivisionError):
        pass
    raise ConfigError(f"cannot read {what} from {x!r}")


@dataclass(frozen=True)
class MemLevel:
    name: str
    capacity: Optional[int]  # words; None means unbounded
    bandwidth: Fraction  # words per cycle
    read_energy: Fraction  # pJ per word
    write_energy: Fraction  # pJ per word
    keep: Optional[frozenset[str]] = None  # tensors this level may store


@dataclass(frozen=True)
class ComputeSpec:
    energy: Fraction  # pJ per compute
    parallel_units: int


@dataclass(frozen=True)
class Arch:
    levels: tuple[MemLevel, ...]  # outermost first
    compute: ComputeSpec

    def level(self, name: str) -> MemLevel:
        for lv in self.levels:
            if lv.name == name:
                return lv
        raise KeyError(name)

    def level_index(self, name: str) -> int:
        for i, lv in enumerate(self.levels):
            if lv.name == name:
                return i
        raise KeyError(name)


def parse_arch(data: Mapping, w: Optional[Workload] = None) -> Arch:
    try:
        levels_raw = data["levels"]
        compute_raw = data["compute"]
    except KeyError as k:
        raise ConfigError(f"architecture is missing section {k}") from None
    if not levels_raw:
        raise ConfigError("need at least one memory level")

    levels: list[MemLevel] = []
    for pos, entry in enumerate(levels_raw):
        try:
            name = str(entry["name"])
        except (KeyError, TypeError):
            raise ConfigError(f"bad level entry {entry!r}") from None
        cap_raw = entry.get("capacity", "unbounded" if pos == 0 else None)
        if pos == 0:
            # The outermost level backs every tensor in full; its capacity
            # is unbounded no matter what the config says.
            cap = None
        elif cap_raw in ("unbounded", None):
            raise ConfigError(f"level {name!r}: only the outermost level may "
                              f"be unbounded; give 'capacity' a positive integer")
        elif isinstance(cap_raw, int) and not isinstance(cap_raw, bool) and cap_raw >= 1:
            cap = cap_raw
        else:
            raise ConfigError(f"level {name!r}: capacity must be a positive "
                              f"integer or 'unbounded', got {cap_raw!r}")
        bw = frac(entry.get("bandwidth", 1), f"level {name!r} bandwidth")
        if bw <= 0:
            raise ConfigError(f"level {name!r}: bandwidth must be positive")
        if "access_energy" in entry:
            rd = wr = frac(entry["access_energy"], f"level {name!r} access_energy")
        else:
            rd = frac(entry.get("read_energy", 0), f"level {name!r} read_energy")
            wr = frac(entry.get("write_energy", 0), f"level {name!r} write_energy")
        if rd < 0 or wr < 0:
            raise ConfigError(f"level {name!r}: energies must be nonnegative")
        keep = entry.get("keep")
        if keep is not None:
            keep = frozenset(str(t) for t in keep)
            if w is not None:
                known = {t.name for t in w.tensors}
                bad = keep - known
                if bad:
                    raise ConfigError(f"level {name!r}: keep names unknown "
                                      f"tensors {sorted(bad)}")
        levels.append(MemLevel(name, cap, bw, rd, wr, keep))

    names = [lv.name for lv in levels]
    if len(set(names)) != len(names):
        raise ConfigError("duplicate memory level names")

    units = compute_raw.get("parallel_units", 1)
    if not isinstance(units, int) or units < 1:
        raise ConfigError("compute.parallel_units must be a positive integer")
    energy = frac(compute_raw.get("energy", 0), "compute energy")
    if energy < 0:
        raise ConfigError("compute.energy must be nonnegative")

    return Arch(tuple(levels), ComputeSpec(energy, units))


def _num_out(x: Fraction):
    return int(x) if x.denominator == 1 else str(x)


def arch_to_dict(a: Arch) -> dict:
    levels = []
    for lv in a.levels:
        d: dict = {
            "name": lv.name,
            "capacity": "unbounded" if lv.capacity is None else lv.capacity,
            "bandwidth": _num_out(lv.bandwidth),
        }
        if lv.read_energy == lv.write_energy:
            d["access_energy"] = _num_out(lv.read_energy)
        else:
            d["read_energy"] = _num_out(lv.read_energy)
            d["write_energy"] = _num_out(lv.write_energy)
        if lv.keep is not None:
            d["keep"] = sorted(lv.keep)
        levels.append(d)
    return {
        "levels": levels,
        "compute": {
            "energy": _num_out(a.compute.energy),
            "parallel_units": a.compute.parallel_units,
        },
    }
