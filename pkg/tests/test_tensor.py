import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from roughlab.tensor import (
    TruncatedTensor,
    antisym2,
    chen_mul,
    dilate,
    identity,
    segment_signature,
    shuffle_defect,
    sym2,
)

from oracles import rs_signature, triple_product


def random_tensor(rng, d):
    return TruncatedTensor(rng.normal(size=d), rng.normal(size=(d, d)), rng.normal(size=(d, d, d)))


def test_identity_is_two_sided(rng):
    x = random_tensor(rng, 3)
    assert (identity(3) * x).allclose(x, 0.0)
    assert (x * identity(3)).allclose(x, 0.0)


def test_collinear_unit_segments():
    a = segment_signature([1.0])
    prod = a * a
    assert prod.allclose(TruncatedTensor([2.0], [[2.0]], [[[4.0 / 3.0]]]))
    assert prod.allclose(segment_signature([2.0]))


def test_associativity_against_expanded_product(rng):
    for _ in range(20):
        a, b, c = (random_tensor(rng, 3) for _ in range(3))
        left = (a * b) * c
        right = a * (b * c)
        assert left.max_abs_diff(right) < 1e-12
        ref = TruncatedTensor(*triple_product(triple_product(a.levels, b.levels), c.levels))
        assert left.max_abs_diff(ref) < 1e-12


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        chen_mul(identity(2), identity(3))


def test_segment_signature_values():
    assert segment_signature(np.zeros(2)).allclose(identity(2), 0.0)
    s = segment_signature([2.0])
    assert s.level1[0] == 2.0 and s.level2[0, 0] == 2.0 and abs(s.level3[0, 0, 0] - 4.0 / 3.0) < 1e-15


def test_segment_signature_matches_quadrature():
    inc = np.array([1.0, -1.0])
    l1, l2, l3 = rs_signature(np.stack([np.zeros(2), inc]), 10_000)
    s = segment_signature(inc)
    for x, y in zip(s.levels, (l1, l2, l3)):
        assert np.max(np.abs(x - y)) < 1e-8


def test_segment_signature_rejects_bad_input():
    with pytest.raises(ValueError):
        segment_signature([np.inf, 0.0])
    with pytest.raises(ValueError):
        segment_signature(np.zeros((2, 2)))


def test_dilation_examples(rng):
    a = TruncatedTensor([2.0], [[2.0]], [[[4.0 / 3.0]]])
    assert dilate(1.0, a).allclose(a, 0.0)
    assert dilate(0.5, a).allclose(TruncatedTensor([1.0], [[0.5]], [[[1.0 / 6.0]]]))
    with pytest.raises(ValueError):
        dilate(0.0, a)
    x, y = random_tensor(rng, 3), random_tensor(rng, 3)
    assert dilate(0.3, x * y).max_abs_diff(dilate(0.3, x) * dilate(0.3, y)) < 1e-12


def test_json_roundtrip(rng):
    x = random_tensor(rng, 2)
    obj = json.loads(x.to_json())
    assert obj["dim"] == 2 and len(obj["data"]) == 2 + 4 + 8
    assert obj["data"][2:6] == x.level2.ravel().tolist()
    assert TruncatedTensor.from_json(x.to_json()).allclose(x, 0.0)


def test_invalid_shapes():
    with pytest.raises(ValueError):
        TruncatedTensor(np.zeros(2), np.zeros((3, 3)), np.zeros((2, 2, 2)))
    with pytest.raises(ValueError):
        TruncatedTensor(np.zeros(1), np.full((1, 1), np.nan), np.zeros((1, 1, 1)))


vec = arrays(np.float64, st.integers(1, 4), elements=st.floats(-5, 5))


@settings(max_examples=60, deadline=None)
@given(vec)
def test_segment_is_geometric(inc):
    s = segment_signature(inc)
    assert shuffle_defect(s.levels) < 1e-12
    assert np.max(np.abs(antisym2(s.level2))) < 1e-12


@settings(max_examples=40, deadline=None)
@given(st.lists(arrays(np.float64, 3, elements=st.floats(-3, 3)), min_size=2, max_size=6))
def test_products_of_segments_stay_geometric(incs):
    acc = identity(3)
    for inc in incs:
        acc = acc * segment_signature(inc)
    assert shuffle_defect(acc.levels) < 1e-10
    assert np.allclose(sym2(acc.level2), np.outer(acc.level1, acc.level1) / 2, atol=1e-10)
