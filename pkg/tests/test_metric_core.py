import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from distortion_lab.generators import gen_example2_line_iid, gen_simplex_metric, random_line_instance, random_metric_instance
from distortion_lab.metric_core import (
    Distribution,
    FiniteMetric,
    Instance,
    InstanceFormatError,
    LineInstance,
    line_distances,
    line_to_instance,
    metric_closure,
    parse_document,
    read_instance,
    validate,
    write_instance,
)


def test_instance_arrays_are_read_only():
    inst = Instance.from_arrays([[0, 1], [1, 0]], [0.5, 0.5])
    with pytest.raises(ValueError):
        inst.dist[0, 1] = 3.0
    with pytest.raises(ValueError):
        inst.p.probs[0] = 1.0


def test_from_arrays_defaults_q_to_p():
    inst = Instance.from_arrays([[0, 1], [1, 0]], [0.25, 0.75])
    assert inst.same_distributions
    assert inst.q is inst.p


def test_dimension_mismatch_raises():
    with pytest.raises(ValueError, match="dimension"):
        Instance(FiniteMetric(np.zeros((2, 2))), Distribution([1.0]), Distribution([1.0]))


def test_line_instance_needs_increasing_positions():
    with pytest.raises(ValueError):
        LineInstance([0.0, 0.0, 1.0], Distribution([0.2, 0.3, 0.5]))


def test_validate_reports_each_kind():
    d = np.array([[0.0, 1.0, 5.0], [1.0, 0.0, 1.0], [5.0, 1.0, 0.0]])
    kinds = {v.kind for v in validate(Instance.from_arrays(d, [0.3, 0.3, 0.4])).violations}
    assert kinds == {"triangle"}

    d = np.array([[0.0, 1.0], [2.0, 0.0]])
    kinds = {v.kind for v in validate(Instance.from_arrays(d, [0.5, 0.5])).violations}
    assert "symmetry" in kinds

    d = np.array([[1.0, 1.0], [1.0, 0.0]])
    kinds = {v.kind for v in validate(Instance.from_arrays(d, [0.5, 0.5])).violations}
    assert "diagonal" in kinds

    d = np.array([[0.0, -1.0], [-1.0, 0.0]])
    kinds = {v.kind for v in validate(Instance.from_arrays(d, [0.5, 0.5])).violations}
    assert "distance.negative" in kinds

    d = np.array([[0.0, 1.0], [1.0, 0.0]])
    kinds = {v.kind for v in validate(Instance.from_arrays(d, [0.5, 0.6])).violations}
    assert any(k.startswith("p") for k in kinds)


def test_validate_triangle_tolerance_is_relative():
    d = np.array([[0.0, 1.0, 2.0 + 5e-10], [1.0, 0.0, 1.0], [2.0 + 5e-10, 1.0, 0.0]])
    inst = Instance.from_arrays(d, [0.3, 0.3, 0.4])
    assert validate(inst).ok
    assert not validate(inst, rel_tol=0.0).ok


def test_line_embedding():
    line = LineInstance([-1.0, 0.5, 2.0], Distribution([0.2, 0.3, 0.5]))
    inst = line_to_instance(line)
    assert inst.dist[0, 2] == 3.0
    assert validate(inst, rel_tol=0.0).ok
    np.testing.assert_array_equal(line_distances([0, 2]), [[0, 2], [2, 0]])


def test_metric_closure_shortcuts_and_rejects_bad_tables():
    d = np.array([[0.0, 1.0, 5.0], [1.0, 0.0, 1.0], [5.0, 1.0, 0.0]])
    closed = metric_closure(d)
    assert closed.dist[0, 2] == 2.0
    assert d[0, 2] == 5.0  # input untouched
    with pytest.raises(ValueError):
        metric_closure([[0.0, -1.0], [-1.0, 0.0]])
    with pytest.raises(ValueError):
        metric_closure([[0.0, 1.0], [2.0, 0.0]])


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 9), st.integers(0, 2**32 - 1))
def test_closure_is_metric_and_idempotent(n, seed):
    rng = np.random.default_rng(seed)
    upper = np.triu(rng.uniform(0, 1, (n, n)), k=1)
    closed = metric_closure(upper + upper.T)
    assert validate(Instance.from_arrays(closed.dist, np.full(n, 1 / n))).ok
    np.testing.assert_array_equal(metric_closure(closed.dist).dist, closed.dist)
    assert np.all(closed.dist <= upper + upper.T)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 9), st.integers(0, 2**32 - 1), st.booleans())
def test_round_trip_is_exact(n, seed, independent_q):
    inst = random_metric_instance(n, seed, independent_q=independent_q)
    back = parse_document(write_instance(inst))
    assert back == inst


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 9), st.integers(0, 2**32 - 1))
def test_line_round_trip_is_exact(n, seed):
    line = random_line_instance(n, seed)
    back = parse_document(write_instance(line))
    assert isinstance(back, LineInstance)
    assert back == line


def test_q_omitted_when_equal_to_p():
    doc = json.loads(write_instance(gen_simplex_metric(3, 0.01)))
    assert set(doc) == {"distances", "p"}


def test_read_instance_embeds_lines():
    line = gen_example2_line_iid(1e-3)
    inst = read_instance(write_instance(line))
    assert isinstance(inst, Instance)
    assert inst == line_to_instance(line)


@pytest.mark.parametrize(
    "text, field",
    [
        ('{"distances": [[0, 1], [1, 0]]}', "p"),
        ('{"distances": [[0, 1], [1, 0]], "p": [0.5]}', "p"),
        ('{"distances": [[0, 1], [1, 0]], "p": [0.5, 0.6]}', "p"),
        ('{"distances": [[0, 1], [1, 0]], "p": [0.5, 0.5], "q": [1.5, -0.5]}', "q"),
        ('{"distances": [[0, 1, 5], [1, 0, 1], [5, 1, 0]], "p": [0.2, 0.3, 0.5]}', "distances"),
        ('{"distances": [[0, 1]], "p": [1.0]}', "distances"),
        ('{"positions": [0, 0], "p": [0.5, 0.5]}', "positions"),
        ('{"positions": [0, 1], "p": ["a", 0.5]}', "p"),
    ],
)
def test_parse_errors_name_the_field(text, field):
    with pytest.raises(InstanceFormatError) as info:
        parse_document(text)
    assert info.value.field == field


@pytest.mark.parametrize("text", ["not json", "[1, 2]", "{}"])
def test_parse_errors_for_bad_documents(text):
    with pytest.raises(InstanceFormatError):
        parse_document(text)
