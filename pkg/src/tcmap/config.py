"""Instance files: one YAML document holding a workload, an
architecture, and run defaults."""

from __future__ import annotations

import importlib.resources
from dataclasses import dataclass

import yaml

from .archspec import Arch, parse_arch
from .model import OBJECTIVES, ModelOptions
from .workload import ConfigError, Workload, parse_workload

_TOP_KEYS = {"workload", "architecture", "objective", "options"}
_OPTION_KEYS = {"line_buffer", "threads", "oracle_cap"}


@dataclass(frozen=True)
class Instance:
    workload: Workload
    arch: Arch
    objective: str
    options: ModelOptions
    threads: int
    oracle_cap: int


def parse_instance(data) -> Instance:
    if not isinstance(data, dict):
        raise ConfigError("instance file must hold a mapping at top level")
    unknown = set(data) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")
    for key in ("workload", "architecture"):
        if key not in data:
            raise ConfigError(f"instance file is missing {key!r}")
    w = parse_workload(data["workload"])
    a = parse_arch(data["architecture"], w)

    objective = data.get("objective", "edp")
    if objective not in OBJECTIVES:
        raise ConfigError(f"objective must be one of {OBJECTIVES}, "
                          f"got {objective!r}")

    opts = data.get("options") or {}
    if not isinstance(opts, dict):
        raise ConfigError("options must be a mapping")
    unknown = set(opts) - _OPTION_KEYS
    if unknown:
        raise ConfigError(f"unknown option keys: {sorted(unknown)}")
    lb = opts.get("line_buffer", False)
    if not isinstance(lb, bool):
        raise ConfigError("options.line_buffer must be true or false")
    threads = opts.get("threads", 1)
    if not isinstance(threads, int) or isinstance(threads, bool) or threads < 1:
        raise ConfigError("options.threads must be a positive integer")
    cap = opts.get("oracle_cap", 10 ** 7)
    if not isinstance(cap, int) or isinstance(cap, bool) or cap < 1:
        raise ConfigError("options.oracle_cap must be a positive integer")

    return Instance(w, a, objective, ModelOptions(line_buffer=lb),
                    threads, cap)


def load_instance(path: str) -> Instance:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = yaml.safe_load(fh)
    except OSError as e:
        raise ConfigError(f"cannot read {path}: {e}") from None
    except yaml.YAMLError as e:
        raise ConfigError(f"cannot parse {path}: {e}") from None
    return parse_instance(data)


def bundled_instance_path(name: str) -> str:
    """Filesystem path of a config shipped with the package."""
    ref = importlib.resources.files(__package__) / "configs" / f"{name}.yaml"
    return str(ref)


def list_bundled() -> list[str]:
    base = importlib.resources.files(__package__) / "configs"
    return sorted(p.name[:-5] for p in base.iterdir()
                  if p.name.endswith(".yaml"))
