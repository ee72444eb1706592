import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from celltrack.core import InstanceRecord, LabelMap, extract_instances
from celltrack.features import (
    FeatureVector,
    SpatialEncodingConfig,
    appearance_descriptor,
    relative_position_encoding,
    spatial_matrix,
)

from oracles import oracle_encoding, scattered_scene


def test_isolated_cell_all_zero():
    cfg = SpatialEncodingConfig(4, 100, 100)
    v = relative_position_encoding(InstanceRecord.point(1, 10, 10), [], cfg)
    assert v.kind == "spatial"
    assert v.values.tolist() == [0.0] * 8


def test_two_neighbours_example():
    cfg = SpatialEncodingConfig(2, 100, 100)
    t = InstanceRecord.point(1, 10, 10)
    others = [InstanceRecord.point(3, 16, 18), InstanceRecord.point(2, 13, 14)]
    v = relative_position_encoding(t, others, cfg)
    assert v.values.tolist() == [0.03, 0.04, 0.06, 0.08]
    assert v.values.tolist() == oracle_encoding(t, others, 2, 100, 100)


def test_padding_and_tie_break_by_label():
    cfg = SpatialEncodingConfig(4, 10, 20)
    t = InstanceRecord.point(5, 5, 5)
    # equidistant neighbours: label 2 must come before label 9
    others = [InstanceRecord.point(9, 6, 5), InstanceRecord.point(2, 4, 5)]
    v = relative_position_encoding(t, others, cfg).values
    assert v.tolist() == [-0.1, 0.0, 0.1, 0.0, 0.0, 0.0, 0.0, 0.0]


def test_encoding_matches_bruteforce_oracle(rng):
    for _ in range(40):
        n_cells = int(rng.integers(5, 51))
        m = scattered_scene(rng, n_cells)
        recs = extract_instances(m)
        n = int(rng.integers(1, 7))
        cfg = SpatialEncodingConfig(n, 64, 64)
        mat = spatial_matrix(recs, cfg)
        for i, r in enumerate(recs):
            others = recs[:i] + recs[i + 1:]
            expect = oracle_encoding(r, others, n, 64, 64)
            assert mat[i].tolist() == expect
            assert relative_position_encoding(r, others, cfg).values.tolist() == expect
        assert mat.shape == (len(recs), 2 * n)
        assert np.all(np.abs(mat) <= 1.0)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(0, 24), st.integers(0, 24))
def test_translation_invariance_bitwise(seed, sx, sy):
    rng = np.random.default_rng(seed)
    m = scattered_scene(rng, int(rng.integers(5, 30)))
    shifted = np.zeros_like(m)
    shifted[sy:, sx:] = m[:64 - sy, :64 - sx]
    cfg = SpatialEncodingConfig(4, 64, 64)
    a = spatial_matrix(extract_instances(m), cfg)
    b = spatial_matrix(extract_instances(shifted), cfg)
    assert np.array_equal(a, b)


def test_descriptor_square_no_intensity():
    m = np.zeros((4, 4), dtype=int)
    m[1:3, 1:3] = 3
    (r,) = extract_instances(m)
    # central moments from the four pixel offsets (+-0.5, +-0.5)
    offs = [(-0.5, -0.5), (0.5, -0.5), (-0.5, 0.5), (0.5, 0.5)]
    mu20 = sum(dx * dx for dx, _ in offs) / 16
    mu02 = sum(dy * dy for _, dy in offs) / 16
    mu11 = sum(dx * dy for dx, dy in offs) / 16
    v = appearance_descriptor(r, LabelMap(m))
    assert v.kind == "visual" and len(v) == 8
    assert v.values.tolist() == [4 / 16, 1.0, 1.0, mu20, mu02, mu11, 0.0, 0.0]


def test_descriptor_constant_intensity():
    m = np.zeros((4, 4), dtype=int)
    m[1:3, 1:3] = 3
    (r,) = extract_instances(m)
    v = appearance_descriptor(r, LabelMap(m), np.full((4, 4), 0.5))
    assert v.values[6] == 0.5 and v.values[7] == 0.0


def test_descriptor_ignores_label_id(rng):
    m = np.zeros((8, 8), dtype=int)
    m[2:5, 1:7] = 4
    inten = rng.random((8, 8))
    (a,) = extract_instances(m)
    (b,) = extract_instances(np.where(m == 4, 77, 0))
    va = appearance_descriptor(a, LabelMap(m), inten).values
    vb = appearance_descriptor(b, LabelMap(np.where(m == 4, 77, 0)), inten).values
    assert np.array_equal(va, vb)
    assert va[1] == 6 / 3


def test_feature_vector_length_invariants():
    with pytest.raises(ValueError):
        FeatureVector(np.zeros(7), "visual")
    with pytest.raises(ValueError):
        FeatureVector(np.zeros(3), "spatial")
    with pytest.raises(ValueError):
        SpatialEncodingConfig(0)
