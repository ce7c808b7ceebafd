import math

import pytest

from distortion_lab.election import distortion
from distortion_lab.line import LINE_SUPREMUM, maximize_three_point, reduce_to_three
from distortion_lab.metric_core import LineInstance, Distribution, write_instance
from distortion_lab.search import (
    CONJECTURED_PQ_EQUAL,
    METRIC_PQ_EQUAL_BOUND,
    SearchConfig,
    brute_force_small,
    search,
)


@pytest.mark.parametrize(
    "kwargs",
    [
        {"space": "bogus"},
        {"restarts": 0},
        {"steps_per_restart": 0},
        {"cooling": 1.0},
        {"cooling": 0.0},
        {"n": 1},
        {"init_temp": 0.0},
    ],
)
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        SearchConfig(**kwargs)


@pytest.mark.parametrize(
    "space, n, bound",
    [
        ("line_pq_equal", 5, LINE_SUPREMUM),
        ("metric_pq_equal", 6, METRIC_PQ_EQUAL_BOUND),
        ("metric_pq_free", 4, 2.0),
    ],
)
def test_search_respects_proven_bounds(space, n, bound):
    res = search(SearchConfig(space=space, n=n, restarts=3, steps_per_restart=300, seed=7), workers=1)
    assert len(res.per_restart_bests) == 3
    assert res.best_value == max(res.per_restart_bests)
    assert res.best_value <= bound + 1e-9
    assert res.evaluations == 3 * 301
    # the reported value is recomputed from the instance, not carried over
    assert abs(distortion(res.best_instance) - res.best_value) <= 1e-12


def test_search_is_reproducible():
    cfg = SearchConfig(space="metric_pq_free", n=4, restarts=2, steps_per_restart=200, seed=3)
    a = search(cfg, workers=1)
    b = search(cfg, workers=1)
    assert a.best_value == b.best_value
    assert a.per_restart_bests == b.per_restart_bests
    assert write_instance(a.best_instance) == write_instance(b.best_instance)


def test_restart_streams_do_not_depend_on_restart_count():
    short = search(SearchConfig(space="line_pq_equal", n=4, restarts=2, steps_per_restart=100, seed=5), workers=1)
    long = search(SearchConfig(space="line_pq_equal", n=4, restarts=4, steps_per_restart=100, seed=5), workers=1)
    assert long.per_restart_bests[:2] == short.per_restart_bests


def test_parallel_matches_sequential():
    cfg = SearchConfig(space="line_pq_equal", n=4, restarts=3, steps_per_restart=100, seed=2)
    seq = search(cfg, workers=1)
    par = search(cfg, workers=2)
    assert seq.per_restart_bests == par.per_restart_bests
    assert write_instance(seq.best_instance) == write_instance(par.best_instance)


def test_unseeded_search_runs():
    res = search(SearchConfig(space="metric_pq_equal", n=5, restarts=2, steps_per_restart=200, seed_every=0), workers=1)
    assert not any(r.seeded for r in res.restarts)
    assert 1.0 <= res.best_value <= METRIC_PQ_EQUAL_BOUND + 1e-9


def test_gap_report_surfaces_the_open_gap():
    res = search(SearchConfig(space="metric_pq_equal", n=5, restarts=1, steps_per_restart=50), workers=1)
    rep = res.gap_report()
    assert rep["conjectured_supremum"] == CONJECTURED_PQ_EQUAL
    assert rep["open_gap"] == [1.5, METRIC_PQ_EQUAL_BOUND]
    assert rep["proven_upper_bound"] == METRIC_PQ_EQUAL_BOUND


def test_trace_records_progress():
    trace = []
    search(SearchConfig(space="line_pq_equal", n=4, restarts=1, steps_per_restart=2000), trace=trace)
    assert [rec["step"] for rec in trace] == [1000, 2000]
    assert all(rec["best"] >= rec["value"] - 1e-15 for rec in trace)


def test_reduction_never_lowers_a_line_incumbent():
    res = search(SearchConfig(space="line_pq_equal", n=6, restarts=2, steps_per_restart=500, seed=11), workers=1)
    inst = res.best_instance
    # incumbents are stored as metric embeddings of sorted, distinct positions
    x = inst.dist[0] - inst.dist[0].min()
    line = LineInstance(x, Distribution(inst.p.probs))
    red = reduce_to_three(line)
    assert red.final >= res.best_value - 1e-9


def test_brute_force_two_point_line_is_one():
    assert brute_force_small("line_pq_equal", 2, 16).best_value == 1.0


def test_brute_force_line_three_points_matches_closed_form():
    grid = brute_force_small("line_pq_equal", 3, 32)
    _, value = maximize_three_point()
    assert grid.best_value <= LINE_SUPREMUM + 1e-12
    assert abs(grid.best_value - value) < 5e-3


def test_brute_force_pq_free_reaches_two():
    grid = brute_force_small("metric_pq_free", 3, 16)
    assert grid.best_value >= 2.0 - 5e-2
    assert grid.best_value <= 2.0 + 1e-9


def test_brute_force_caps_and_arguments():
    with pytest.raises(ValueError):
        brute_force_small("line_pq_equal", 5, 16)
    with pytest.raises(ValueError):
        brute_force_small("line_pq_equal", 3, 4)
    with pytest.raises(ValueError, match="cap"):
        brute_force_small("metric_pq_free", 3, 64)


def test_brute_force_four_point_metric():
    grid = brute_force_small("metric_pq_equal", 4, 8)
    assert grid.best_value == pytest.approx(4 / 3, abs=1e-12)
    assert abs(distortion(grid.best_instance) - grid.best_value) <= 1e-12
    with pytest.raises(ValueError, match="cap"):
        brute_force_small("metric_pq_free", 4, 8)
    with pytest.raises(ValueError, match="cap"):
        brute_force_small("metric_pq_equal", 4, 16)


def test_batched_grid_matches_exact_path():
    grid = brute_force_small("metric_pq_equal", 3, 16)
    assert grid.best_value == pytest.approx(1.2556818181818181, abs=1e-12)
