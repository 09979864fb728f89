import pytest

from tcmap.mapspace import FAULT_STRICT_REUSE_BELOW, count_mapspace
from tcmap.model import CapExceeded, ModelOptions
from tcmap.oracle import (enumerate_unpruned_mapspace, oracle_search,
                          verify_pruning)


def test_literal_enumeration_matches_counted_space(bundle):
    # regression guard: every slot must draw from its own permutation
    # pool, or multi-slot placements silently vanish from the stream
    inst = bundle("conv-tiny")
    stats = count_mapspace(inst.workload, inst.arch)
    n = sum(1 for _ in enumerate_unpruned_mapspace(inst.workload, inst.arch))
    assert n == stats.product_raw == 4778


def test_oracle_totals_and_histogram(bundle):
    inst = bundle("matmul-tiny")
    rep = oracle_search(inst.workload, inst.arch, "edp")
    assert rep.total_mappings == 533526
    assert rep.valid_mappings == 533526  # tiny tensors all fit
    assert len(rep.histogram) == 16
    assert sum(rep.histogram.values()) == rep.total_mappings
    assert rep.best_objective == 32
    assert rep.best_metrics.energy == 4
    assert rep.best_metrics.latency == 8
    assert rep.best_tree is not None


def test_oracle_agrees_with_itself_on_line_buffer(bundle):
    # the line buffer only changes storage occupancy; on an instance
    # where everything fits the optimum is unchanged
    inst = bundle("conv-tiny")
    off = oracle_search(inst.workload, inst.arch, "edp")
    on = oracle_search(inst.workload, inst.arch, "edp",
                       options=ModelOptions(line_buffer=True))
    assert on.total_mappings == off.total_mappings
    assert on.best_objective == off.best_objective


def test_oracle_cap(bundle):
    inst = bundle("matmul-re1")
    with pytest.raises(CapExceeded):
        oracle_search(inst.workload, inst.arch, "edp", cap=1000)


@pytest.mark.parametrize("name,checked,table",
                         [("matmul-tiny", 571, 40), ("conv-tiny", 367, 92)])
def test_verify_pruning_clean(bundle, name, checked, table):
    inst = bundle(name)
    rep = verify_pruning(inst.workload, inst.arch)
    assert rep.ok
    assert rep.violations == []
    assert rep.checked == checked
    assert rep.table_size == table


def test_verify_pruning_catches_injected_fault(bundle):
    inst = bundle("matmul-tiny")
    rep = verify_pruning(inst.workload, inst.arch,
                         fault=FAULT_STRICT_REUSE_BELOW)
    assert not rep.ok
    assert len(rep.violations) >= 1


def test_fault_violation_messages_are_bounded(bundle):
    inst = bundle("conv-tiny")
    rep = verify_pruning(inst.workload, inst.arch,
                         fault=FAULT_STRICT_REUSE_BELOW)
    assert not rep.ok
    assert len(rep.violations) <= 51  # capped report plus ellipsis line
