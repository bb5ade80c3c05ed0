import numpy as np
import pytest

from pganet.config import RunConfig
from pganet.grid_graph import GridSpec, NeighborMode, generate_grid_graph
from pganet.verification import (
    SuiteReport, corrupt_adjacency, influence_support, reports_frame, run_all,
    run_attention_suite, run_gradient_suite, run_locality_suite, run_oracle_suite
)


def test_oracle_suite_passes():
    report = run_oracle_suite()
    assert report.passed
    assert report.checks == (64 + 2) * 3


def test_corrupted_grid_is_named():
    report = run_oracle_suite(corrupt_grid=(3, 4))
    assert not report.passed
    assert "3x4/four" in report.failures
    assert all(label.startswith("3x4/") for label in report.failures)


def test_corrupt_adjacency_changes_graph():
    adjacency = generate_grid_graph(GridSpec(2, 2), NeighborMode.FOUR)
    assert corrupt_adjacency(adjacency) != adjacency
    empty = generate_grid_graph(GridSpec(1, 1), NeighborMode.FOUR)
    assert corrupt_adjacency(empty).num_edges == 1


def test_attention_suite_passes():
    report = run_attention_suite(seed=3, instances=20)
    assert report.passed
    assert report.checks == 60


def test_gradient_suite_single_seed():
    report = run_gradient_suite([0])
    assert report.passed, report.failures
    assert report.checks == 13


@pytest.mark.parametrize("depth", [1, 2, 3])
def test_influence_stays_within_depth(depth):
    changed, hops = influence_support(depth, pixel=5)
    assert changed.any()
    assert np.all(hops[changed] <= depth)


def test_single_layer_reaches_neighbors():
    changed, hops = influence_support(1, pixel=5)
    assert np.all(changed[hops == 1])
    assert not changed[hops > 1].any()


def test_locality_suite_passes():
    report = run_locality_suite(seed=1, depths=(1, 2))
    assert report.passed
    assert report.checks == 32


def test_reports_frame():
    ok = SuiteReport("a", checks=2)
    bad = SuiteReport("b", checks=3, failures=["x", "y"])
    frame = reports_frame([ok, bad])
    assert frame["status"].tolist() == ["pass", "fail"]
    assert frame.loc[1, "failed"] == "x; y"
    assert frame["failures"].tolist() == [0, 2]


@pytest.mark.slow
def test_full_verification_with_default_seeds():
    reports = run_all(RunConfig())
    assert all(r.passed for r in reports), [r.failures for r in reports]
