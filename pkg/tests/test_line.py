import json
import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from distortion_lab.generators import gen_example2_line_iid, random_line_instance
from distortion_lab.line import (
    LINE_SUPREMUM,
    DegenerateMedianError,
    PreconditionError,
    check_social_order,
    check_vote_order,
    compact,
    conditional_distortion,
    cross_median_social,
    limit_objective,
    line_distortion,
    maximize_three_point,
    median_index,
    merge_worst_left,
    merge_worst_right,
    mirror,
    one_side_social,
    reduce_left,
    reduce_right,
    reduce_to_three,
    structure,
    support_size,
    three_point_social,
)
from distortion_lab.metric_core import Distribution, LineInstance

seeds = st.integers(0, 2**32 - 1)


def _random_line(n, seed):
    line = random_line_instance(n, seed)
    try:
        median_index(line)
    except DegenerateMedianError:
        assume(False)
    return line


def test_median_index():
    line = LineInstance([0, 1, 2], Distribution([0.3, 0.3, 0.4]))
    assert median_index(line) == 1
    line = LineInstance([0, 1, 2], Distribution([0.6, 0.1, 0.3]))
    assert median_index(line) == 0


def test_degenerate_median_is_flagged():
    with pytest.raises(DegenerateMedianError):
        median_index(LineInstance([0, 1], Distribution([0.5, 0.5])))


def test_compact_and_mirror():
    line = LineInstance([0.0, 1.0, 3.0], Distribution([0.5, 0.0, 0.5]))
    assert compact(line).n == 2
    assert support_size(line) == 2
    m = mirror(line)
    np.testing.assert_array_equal(m.positions, [-3.0, -1.0, 0.0])
    assert mirror(m) == line


@settings(max_examples=80, deadline=None)
@given(st.integers(2, 10), seeds)
def test_vote_and_social_order(n, seed):
    line = _random_line(n, seed)
    assert check_vote_order(line) == []
    assert check_social_order(line) == []


@settings(max_examples=80, deadline=None)
@given(st.integers(2, 10), seeds)
def test_simplified_expressions_agree(n, seed):
    line = _random_line(n, seed)
    d = line_distortion(line)
    assert cross_median_social(line) == pytest.approx(d, rel=1e-12)
    assert one_side_social(line, "left") == pytest.approx(d, rel=1e-12)
    assert one_side_social(line, "right") == pytest.approx(d, rel=1e-12)
    r = conditional_distortion(line)
    assert math.fsum((line.probs * r).tolist()) == pytest.approx(d, rel=1e-12)


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 10), seeds)
def test_line_distortion_below_supremum(n, seed):
    assert line_distortion(random_line_instance(n, seed)) <= LINE_SUPREMUM + 1e-9


@settings(max_examples=120, deadline=None)
@given(st.integers(4, 12), seeds)
def test_reduction_is_monotone(n, seed):
    line = _random_line(n, seed)
    red = reduce_to_three(line)
    assert red.result.n <= 3
    assert red.final >= red.initial - 1e-9
    prev = red.initial
    for step in red.trace:
        assert step.distortion >= prev - 1e-12
        prev = step.distortion
    assert red.final == pytest.approx(line_distortion(red.result), rel=1e-14)
    assert len(red.trace) <= 2 * n * n + 8


def test_trace_records_are_json_lines():
    red = reduce_to_three(LineInstance([0, 0.3, 0.5, 0.8, 1], Distribution([0.2] * 5)))
    lines = red.trace_jsonl().splitlines()
    assert len(lines) == len(red.trace) >= 1
    for text in lines:
        assert set(json.loads(text)) == {"lemma", "support", "distortion"}


def test_padded_example2_reduces_back():
    base = gen_example2_line_iid(1e-3)
    x = np.concatenate([base.positions, [1.5, 2.0]])
    p = np.concatenate([base.probs, [0.0, 0.0]])
    red = reduce_to_three(LineInstance(x, Distribution(p)))
    assert red.result == base
    assert red.final >= line_distortion(base) - 1e-12


def test_padded_example2_with_light_points():
    # light extra points on both sides still collapse to three points
    x = [-2.0, -1.0, 1e-3, 0.5, 1.0, 1.5]
    p = [0.01, 0.49 - 1e-3, 1 - 2**-0.5 - 0.01, 0.02, 2**-0.5 - 0.5 + 1e-3 - 0.01, 0.01]
    p[-1] = 1.0 - math.fsum(p[:-1])
    line = LineInstance(x, Distribution(p))
    red = reduce_to_three(line)
    assert red.result.n <= 3
    assert red.final >= red.initial - 1e-9


def test_one_sided_instance_collapses_to_point_mass():
    line = LineInstance([0.0, 1.0, 2.0, 3.0], Distribution([0.1, 0.1, 0.1, 0.7]))
    red = reduce_to_three(line)
    assert red.result.n == 1
    assert red.trace[-1].lemma == "collapse_one_sided"
    assert red.final == 1.0


@settings(max_examples=60, deadline=None)
@given(st.integers(3, 9), seeds)
def test_merge_steps_do_not_lower_distortion(n, seed):
    line = _random_line(n, seed)
    st_ = structure(line)
    assume(st_.left and st_.right)
    before = line_distortion(line)
    assert line_distortion(merge_worst_right(line)) >= before - 1e-12
    assert line_distortion(merge_worst_left(line)) >= before - 1e-12


def test_step_preconditions():
    line = LineInstance([0.0, 0.5, 0.6, 1.0], Distribution([0.2, 0.35, 0.25, 0.2]))
    with pytest.raises(PreconditionError):
        # the median sits at index 1; a right side of two points is not a single point
        reduce_left(line)
    one_sided = LineInstance([0.0, 1.0], Distribution([0.7, 0.3]))
    with pytest.raises(PreconditionError):
        reduce_right(one_sided)


@pytest.mark.parametrize("seed, case", [(44, 1), (454, 2)])
def test_reduce_left_cases(seed, case):
    line = random_line_instance(5, seed)
    out, step = reduce_left(line)
    assert step.case == case
    assert out.n == line.n - 1
    assert line_distortion(out) >= line_distortion(line) - 1e-12
    if case == 1:
        assert step.moved == structure(line).m - 1
    else:
        assert step.moved == 1 and step.target in (0, 2)


@settings(max_examples=100, deadline=None)
@given(
    st.floats(0.01, 0.49),
    st.floats(0.01, 0.49),
    st.floats(0.51, 0.99),
)
def test_three_point_closed_form_matches_elections(p1, p3, x2):
    p2 = 1.0 - p1 - p3
    value, in_regime = three_point_social(p1, p2, p3, x2)
    line = LineInstance([0.0, x2, 1.0], Distribution([p1, p2, p3]))
    assume(abs(p1 - 0.5) > 1e-9 and abs(p1 + p2 - 0.5) > 1e-9)
    assert value == pytest.approx(line_distortion(line), rel=1e-12)
    assert value <= LINE_SUPREMUM + 1e-12


def test_maximize_three_point():
    p3, value = maximize_three_point()
    assert abs(p3 - (math.sqrt(2) - 1) / 2) <= 1e-8
    assert abs(value - LINE_SUPREMUM) <= 1e-10
    assert limit_objective(p3) == value


def test_limit_objective_endpoints():
    assert limit_objective(0.0) == 1.0
    assert limit_objective(0.5) == pytest.approx(1.0)


def test_three_point_reference_point():
    value, in_regime = three_point_social(0.49, 0.3, 0.21, 0.55)
    assert in_regime
    line = LineInstance([0.0, 0.55, 1.0], Distribution([0.49, 0.3, 0.21]))
    assert abs(value - line_distortion(line)) <= 1e-12
    assert three_point_social(0.0, 0.5, 0.5, 0.7) == (1.0, True)


@pytest.mark.parametrize("seed", [454])
def test_case2_picks_the_better_endpoint(seed):
    line = random_line_instance(5, seed)
    out, step = reduce_left(line)
    assert step.case == 2
    other = 0 if step.target == 2 else 2
    p = line.probs.copy()
    p[other] += p[1]
    keep = [i for i in range(line.n) if i != 1]
    alt = LineInstance(line.positions[keep], Distribution(p[keep]))
    assert line_distortion(out) >= line_distortion(alt) - 1e-12


@settings(max_examples=60, deadline=None)
@given(st.integers(4, 10), seeds)
def test_median_coordinate_and_vote_order_preserved(n, seed):
    line = _random_line(n, seed)
    m_x = line.positions[median_index(line)]
    red = reduce_to_three(line)
    if red.result.n > 1:
        assert red.result.positions[median_index(red.result)] == m_x
        assert check_vote_order(red.result) == []
