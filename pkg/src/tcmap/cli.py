"""Command line front end.

Subcommands: ``map`` searches the reduced space for the best mapping,
``count`` sizes the full and reduced spaces, ``oracle`` runs the
brute-force reference search, ``explain`` shows how one generated
mapping is put together (text only).

Exit codes: 0 success, 1 bad configuration or usage, 2 no valid mapping
exists, 3 a brute-force cap was exceeded.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from fractions import Fraction

from . import explorer, oracle as oracle_mod, symexpr as se
from .config import ConfigError, Instance, load_instance
from .looptree import serialize
from .mapspace import enumerate_dataplacements, generate_dataflows
from .model import (CapExceeded, ModelOptions, curry, objective_value)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NO_MAPPING = 2
EXIT_CAP = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage problems are config problems
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _num_str(x) -> str:
    f = Fraction(x)
    if f.denominator == 1:
        return str(f.numerator)
    return f"{f.numerator}/{f.denominator}"


def _put_num(d: dict, key: str, x) -> None:
    d[key] = _num_str(x)
    if Fraction(x).denominator != 1:
        d[key + "_approx"] = f"{float(x):.6g}"


def _emit(payload: dict, fmt: str, text: str) -> None:
    if fmt == "json":
        print(json.dumps(payload, indent=2))
    else:
        print(text, end="")


def build_parser() -> _Parser:
    p = _Parser(prog="tcmap", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="cmd", required=True)

    def common(sp, output=True):
        sp.add_argument("config", help="instance YAML file")
        if output:
            sp.add_argument("--output", choices=("text", "json"),
                            default="text")
        sp.add_argument("--line-buffer", action="store_true", default=None,
                        help="enable sliding-window buffering")

    sp = sub.add_parser("map", help="search the reduced mapping space")
    common(sp)
    sp.add_argument("--objective", choices=("edp", "energy", "latency"))
    sp.add_argument("--threads", type=int)

    sp = sub.add_parser("count", help="size the mapping spaces")
    sp.add_argument("config", help="instance YAML file")
    sp.add_argument("--output", choices=("text", "json"), default="text")

    sp = sub.add_parser("oracle", help="brute-force reference search")
    common(sp)
    sp.add_argument("--objective", choices=("edp", "energy", "latency"))
    sp.add_argument("--oracle-cap", type=int,
                    help="maximum unreduced mappings to enumerate")

    sp = sub.add_parser("explain", help="describe one generated mapping")
    common(sp, output=False)
    sp.add_argument("--dp", type=int, default=0,
                    help="dataplacement index")
    sp.add_argument("--df", type=int, default=0,
                    help="dataflow index within the dataplacement")
    return p


def _threads(args, inst: Instance) -> int:
    if getattr(args, "threads", None) is not None:
        return args.threads
    env = os.environ.get("TCMAP_THREADS")
    if env:
        try:
            n = int(env)
        except ValueError:
            raise ConfigError(f"TCMAP_THREADS={env!r} is not an integer") \
                from None
        if n < 1:
            raise ConfigError("TCMAP_THREADS must be a positive integer")
        return n
    return inst.threads

def _options(args, inst: Instance) -> ModelOptions:
    lb = getattr(args, "line_buffer", None)
    if lb is None:
        lb = inst.options.line_buffer
    return ModelOptions(line_buffer=lb)


def _objective(args, inst: Instance) -> str:
    return getattr(args, "objective", None) or inst.objective


def _cmd_map(args) -> int:
    inst = load_instance(args.config)
    objective = _objective(args, inst)
    options = _options(args, inst)
    threads = _threads(args, inst)
    rep = explorer.search_all(inst.workload, inst.arch, objective,
                              threads=threads, options=options)
    if rep.best_metrics is None:
        print("no valid mapping", file=sys.stderr)
        return EXIT_NO_MAPPING
    m = rep.best_metrics
    tree_text = serialize(rep.best_tree)

    payload: dict = {"best_mapping": tree_text.splitlines()}
    _put_num(payload, "energy_pj", m.energy)
    _put_num(payload, "latency_cycles", m.latency)
    _put_num(payload, "edp", m.energy * m.latency)
    per_level: dict = {}
    for name in (lv.name for lv in inst.arch.levels):
        entry: dict = {}
        _put_num(entry, "usage_words", m.usage[name])
        _put_num(entry, "accesses_words", m.accesses[name])
        per_level[name] = entry
    payload["per_level"] = per_level
    payload["stats"] = {
        "num_dp": str(rep.stats.num_dp),
        "num_df_pruned": str(rep.stats.num_df_pruned),
        "num_ts_evaluated": str(rep.stats.num_evaluated),
        "wall_time_ms": f"{rep.wall_time_ms:.3f}",
    }

    lines = [tree_text.rstrip("\n"), ""]
    lines.append(f"objective ({objective}): "
                 f"{_num_str(objective_value(objective, m.energy, m.latency))}")
    lines.append(f"energy: {_num_str(m.energy)} pJ")
    lines.append(f"latency: {_num_str(m.latency)} cycles")
    lines.append(f"edp: {_num_str(m.energy * m.latency)}")
    for name in (lv.name for lv in inst.arch.levels):
        lines.append(f"{name}: usage {_num_str(m.usage[name])} words, "
                     f"accesses {_num_str(m.accesses[name])} words")
    lines.append(f"searched {rep.stats.num_dp} dataplacements, "
                 f"{rep.stats.num_df_pruned} dataflows, "
                 f"{rep.stats.num_evaluated} tile shapes "
                 f"in {rep.wall_time_ms:.1f} ms")
    _emit(payload, args.output, "\n".join(lines) + "\n")
    return EXIT_OK


def _cmd_count(args) -> int:
    inst = load_instance(args.config)
    from .mapspace import count_mapspace
    st = count_mapspace(inst.workload, inst.arch)
    payload = st.as_strings()
    text_lines = [
        f"dataplacements: {st.num_dp}",
        f"dataflows (full): {st.num_df_raw}",
        f"dataflows (reduced): {st.num_df_pruned}",
        f"tile shapes (full): {st.num_ts_raw}",
        f"tile shapes (reduced): {st.num_ts_pruned}",
        f"mappings (full): {st.product_raw}",
        f"mappings (reduced): {st.product_pruned}",
    ]
    _emit(payload, args.output, "\n".join(text_lines) + "\n")
    return EXIT_OK


def _cmd_oracle(args) -> int:
    inst = load_instance(args.config)
    objective = _objective(args, inst)
    options = _options(args, inst)
    cap = args.oracle_cap if args.oracle_cap is not None else inst.oracle_cap
    rep = oracle_mod.oracle_search(inst.workload, inst.arch, objective,
                                   cap=cap, options=options)
    if rep.best_metrics is None:
        print("no valid mapping", file=sys.stderr)
        return EXIT_NO_MAPPING

    payload: dict = {
        "total_mappings": str(rep.total_mappings),
        "valid_mappings": str(rep.valid_mappings),
    }
    _put_num(payload, "best_objective", rep.best_objective)
    payload["best_mapping"] = serialize(rep.best_tree).splitlines()
    payload["histogram_by_dataplacement"] = {
        k: str(v) for k, v in rep.histogram.items()}

    lines = [serialize(rep.best_tree).rstrip("\n"), ""]
    lines.append(f"objective ({objective}): {_num_str(rep.best_objective)}")
    lines.append(f"mappings: {rep.total_mappings} total, "
                 f"{rep.valid_mappings} valid")
    lines.append("valid mappings by dataplacement:")
    for k, v in rep.histogram.items():
        lines.append(f"  {k}: {v}")
    _emit(payload, args.output, "\n".join(lines) + "\n")
    return EXIT_OK


def _cmd_explain(args) -> int:
    inst = load_instance(args.config)
    w, a = inst.workload, inst.arch
    options = _options(args, inst)
    dps = enumerate_dataplacements(w, a)
    if not 0 <= args.dp < len(dps):
        raise ConfigError(f"--dp must be in [0, {len(dps)}), got {args.dp}")
    dp = dps[args.dp]
    dfs = generate_dataflows(dp, w)
    if not 0 <= args.df < len(dfs):
        raise ConfigError(f"--df must be in [0, {len(dfs)}) for this "
                          f"dataplacement, got {args.df}")
    pm = dfs[args.df]
    cm = curry(pm, w, a, inst.objective, options)

    from .mapspace import helpful_vars
    out = [f"dataplacement {args.dp}: {dp.key()}",
           f"dataflow {args.df} of {len(dfs)}", ""]
    for s in range(dp.n_slots):
        helpful, cands = helpful_vars(dp, s, w)
        below = dp.below_node(s)
        where = "compute" if below is None else f"[{below.level}: {below.tensor}]"
        out.append(f"slot {s} (above {where}): loops "
                   f"{', '.join(pm.slot_loops[s]) or '(none)'}; "
                   f"helpful {{{', '.join(helpful)}}}"
                   + (f"; window candidates {{{', '.join(cands)}}}"
                      if cands else ""))
    out.append("")
    out.append("loop nest with free tile bounds:")
    loops = pm.loops()
    pos = 0
    for i, node in enumerate(dp.nodes):
        out.append(f"  [{node.level}: {node.tensor}]")
        if i < dp.n_backing - 1:
            continue
        s = i - dp.n_backing + 1
        for slot, v, idx in loops[pos:]:
            if slot != s:
                break
            out.append(f"  for {v}{idx} in {v.upper()}{idx}")
            pos += 1
    out.append("  compute")
    out.append("")
    out.append(f"energy: {se.to_text(cm.energy)}")
    out.append(f"latency: {se.to_text(cm.latency)}")
    for name in cm.level_names:
        out.append(f"usage[{name}]: {se.to_text(cm.usage[name])}")
    for name in cm.level_names:
        out.append(f"accesses[{name}]: {se.to_text(cm.accesses[name])}")
    out.append(f"objective ({cm.objective}): {se.to_text(cm.objective_expr)}")
    print("\n".join(out))
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.cmd == "map":
            return _cmd_map(args)
        if args.cmd == "count":
            return _cmd_count(args)
        if args.cmd == "oracle":
            return _cmd_oracle(args)
        return _cmd_explain(args)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except CapExceeded as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CAP


def console_entry() -> None:  # pragma: no cover
    sys.exit(main())


if __name__ == "__main__":  # pragma: no cover
    console_entry()
