import json
import subprocess
import sys

import pytest

from tcmap import cli, explorer
from tcmap.config import bundled_instance_path

TINY = bundled_instance_path("matmul-tiny")
RE1 = bundled_instance_path("matmul-re1")
CONV = bundled_instance_path("conv-tiny")


def run_cli(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_no_arguments_is_a_usage_error(capsys):
    with pytest.raises(SystemExit) as ei:
        cli.main([])
    assert ei.value.code == 1


def test_unknown_flag_is_a_usage_error(capsys):
    with pytest.raises(SystemExit) as ei:
        cli.main(["count", TINY, "--frobnicate"])
    assert ei.value.code == 1


def test_missing_config_exits_1(capsys):
    code, _, err = run_cli(capsys, "count", "/nonexistent/x.yaml")
    assert code == 1
    assert "error:" in err


def test_bad_yaml_exits_1(capsys, tmp_path):
    p = tmp_path / "bad.yaml"
    p.write_text("workload: [oops\n")
    code, _, err = run_cli(capsys, "map", str(p))
    assert code == 1


def test_count_json_golden(capsys):
    code, out, _ = run_cli(capsys, "count", TINY, "--output", "json")
    assert code == 0
    assert json.loads(out) == {
        "num_dp": "16",
        "num_df_raw": "9186",
        "num_df_pruned": "16",
        "num_ts_raw": "571",
        "num_ts_pruned": "40",
        "product_raw": "533526",
        "product_pruned": "40",
    }


def test_count_text(capsys):
    code, out, _ = run_cli(capsys, "count", CONV)
    assert code == 0
    assert "mappings (full): 4778" in out
    assert "mappings (reduced): 131" in out


def test_map_text_shows_tree_and_metrics(capsys):
    code, out, _ = run_cli(capsys, "map", TINY)
    assert code == 0
    assert out.startswith("[DRAM: A]\n[DRAM: B]\n[DRAM: Z]\n")
    assert "objective (edp): 32" in out
    assert "energy: 4 pJ" in out
    assert "latency: 8 cycles" in out


def test_map_json_payload(capsys):
    code, out, _ = run_cli(capsys, "map", TINY, "--output", "json")
    assert code == 0
    d = json.loads(out)
    assert d["energy_pj"] == "4"
    assert d["latency_cycles"] == "8"
    assert d["edp"] == "32"
    assert d["best_mapping"][0] == "[DRAM: A]"
    assert list(d["per_level"]) == ["DRAM", "GLB"]
    assert d["per_level"]["GLB"] == {"usage_words": "0",
                                    "accesses_words": "0"}
    assert d["stats"]["num_dp"] == "16"
    float(d["stats"]["wall_time_ms"])  # parseable timing


def test_map_objective_flag_overrides_config(capsys):
    code, out, _ = run_cli(capsys, "map", RE1, "--objective", "energy",
                           "--output", "json")
    assert code == 0
    assert json.loads(out)["energy_pj"] == "32"


def test_map_fractional_values_get_approx_keys(capsys, tmp_path):
    # halved bandwidth makes latency and edp non-integral rationals
    cfg = tmp_path / "frac.yaml"
    cfg.write_text(
        "workload:\n"
        "  ranks: {m: 2, n: 2, k: 2}\n"
        "  tensors:\n"
        "    - {name: A, role: input, dims: [m, k]}\n"
        "    - {name: B, role: input, dims: [k, n]}\n"
        "    - {name: Z, role: output, dims: [m, n]}\n"
        "architecture:\n"
        "  levels:\n"
        "    - {name: DRAM, bandwidth: 2, access_energy: 100}\n"
        "  compute: {energy: 0.3, parallel_units: 1}\n")
    code, out, _ = run_cli(capsys, "map", str(cfg), "--output", "json")
    assert code == 0
    d = json.loads(out)
    assert d["energy_pj"] == "12/5"
    assert d["energy_pj_approx"] == "2.4"
    assert d["edp"] == "96/5"
    assert d["edp_approx"] == "19.2"


def test_map_no_valid_mapping_exits_2(capsys, monkeypatch):
    real = explorer.search_all

    def empty(w, a, objective="edp", threads=1, options=None):
        rep = real(w, a, objective)
        return explorer.SearchReport(objective=rep.objective,
                                     best_metrics=None, best_pm=None,
                                     best_bounds=None, best_tree=None,
                                     stats=rep.stats,
                                     wall_time_ms=rep.wall_time_ms)

    monkeypatch.setattr(explorer, "search_all", empty)
    code, _, err = run_cli(capsys, "map", TINY)
    assert code == 2
    assert "no valid mapping" in err


def test_oracle_cap_exits_3(capsys):
    code, _, err = run_cli(capsys, "oracle", RE1, "--oracle-cap", "1000")
    assert code == 3
    assert "error:" in err


def test_oracle_json(capsys):
    code, out, _ = run_cli(capsys, "oracle", CONV, "--output", "json")
    assert code == 0
    d = json.loads(out)
    assert d["total_mappings"] == "4778"
    assert d["valid_mappings"] == "4778"
    assert d["best_objective"] == "32"
    hist = d["histogram_by_dataplacement"]
    assert len(hist) == 16
    assert sum(int(v) for v in hist.values()) == 4778


def test_oracle_respects_objective_flag(capsys):
    code, out, _ = run_cli(capsys, "oracle", TINY, "--objective", "latency",
                           "--output", "json")
    assert code == 0
    assert json.loads(out)["best_objective"] == "8"


def test_explain_prints_slots_and_expressions(capsys):
    code, out, _ = run_cli(capsys, "explain", RE1, "--dp", "4", "--df", "0")
    assert code == 0
    assert "dataplacement 4:" in out
    assert "slot 0" in out
    assert "loop nest with free tile bounds:" in out
    assert "energy:" in out
    assert "objective (edp):" in out


def test_explain_range_checks(capsys):
    code, _, err = run_cli(capsys, "explain", TINY, "--dp", "99")
    assert code == 1
    code, _, err = run_cli(capsys, "explain", TINY, "--df", "99")
    assert code == 1


def test_threads_env_is_validated(capsys, monkeypatch):
    monkeypatch.setenv("TCMAP_THREADS", "zero")
    code, _, err = run_cli(capsys, "map", TINY)
    assert code == 1
    monkeypatch.setenv("TCMAP_THREADS", "2")
    code, _, _ = run_cli(capsys, "map", TINY)
    assert code == 0


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "tcmap", "count", TINY],
                         capture_output=True, text=True)
    assert out.returncode == 0
    assert "dataplacements: 16" in out.stdout
