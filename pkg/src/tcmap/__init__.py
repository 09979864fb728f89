"""tcmap: exhaustive mapping search for tensor computations on
hierarchical memory, with closed-form curried cost models."""

from .archspec import Arch, ComputeSpec, MemLevel, parse_arch
from .config import Instance, load_instance, parse_instance
from .explorer import SearchReport, explore_tile_shapes, search_all
from .looptree import LoopNode, LoopTree, ParseError, StorageNode, \
    parse_tree, serialize, validate
from .mapspace import (Dataplacement, MapspaceStats, PMapping,
                       count_mapspace, enumerate_dataplacements,
                       enumerate_tile_shapes, generate_dataflows)
from .model import (CapExceeded, CurriedModel, Metrics, ModelOptions,
                    curry, direct_evaluate, evaluate_model, trace_check)
from .oracle import OracleReport, oracle_search, verify_pruning
from .workload import ConfigError, Workload, parse_workload

__version__ = "0.1.0"

__all__ = [
    "Arch", "CapExceeded", "ComputeSpec", "ConfigError", "CurriedModel",
    "Dataplacement", "Instance", "LoopNode", "LoopTree", "MapspaceStats",
    "MemLevel", "Metrics", "ModelOptions", "OracleReport", "PMapping",
    "ParseError", "SearchReport", "StorageNode", "Workload",
    "count_mapspace", "curry", "direct_evaluate", "enumerate_dataplacements",
    "enumerate_tile_shapes", "evaluate_model", "explore_tile_shapes",
    "generate_dataflows", "load_instance", "oracle_search", "parse_arch",
    "parse_instance", "parse_tree", "parse_workload", "search_all",
    "serialize", "trace_check", "validate", "verify_pruning",
    "__version__",
]
