import math

import numpy as np
import pytest

from celltrack.core import FrameSet
from celltrack.lineage import LineageGraph, Track
from celltrack.siamese import (
    DimensionError,
    PairExample,
    SiameseHead,
    TrainConfig,
    bce_loss,
    build_pairs,
    forward,
    gradients,
    init_heads,
    tracking_loss,
    train,
)

from oracles import (
    finite_difference_grads,
    kink_units,
    max_relative_error,
    random_head_and_pair,
    straight_line_score,
)


def test_zero_network_scores_half():
    head = SiameseHead.zeros(4)
    assert forward(head, np.ones(4), -np.ones(4)) == 0.5


def test_identical_inputs_score_sigmoid_b2(rng):
    head = SiameseHead.init(5, rng)
    head.b2 = 0.7
    a = rng.normal(size=5)
    assert forward(head, a, a) == 1 / (1 + math.exp(-0.7))


def test_forward_matches_straight_line_oracle(rng):
    for _ in range(20):
        head, pair = random_head_and_pair(rng)
        got = forward(head, pair.feat_a, pair.feat_b)
        want = straight_line_score(head.W1, head.b1, head.W2, head.b2, pair.feat_a, pair.feat_b)
        assert got == pytest.approx(want, rel=1e-12, abs=1e-14)
        assert 0.0 < got < 1.0
        assert forward(head, pair.feat_a, pair.feat_b) == forward(head, pair.feat_b, pair.feat_a)


def test_forward_dimension_mismatch(rng):
    head = SiameseHead.init(4, rng)
    with pytest.raises(DimensionError):
        forward(head, np.zeros(4), np.zeros(3))


def test_bce_values():
    assert bce_loss(0.5, 1) == pytest.approx(math.log(2), abs=1e-15)
    assert bce_loss(1.0, 1) == pytest.approx(0.0, abs=1e-6)
    assert bce_loss(0.9, 0) == pytest.approx(-math.log(0.1), abs=1e-12)
    assert bce_loss(0.9, 0) == pytest.approx(2.302585, abs=1e-6)
    assert bce_loss(0.0, 1) == pytest.approx(-math.log(1e-7))


def test_tracking_loss():
    assert tracking_loss(0, 0) == 0
    assert tracking_loss(math.log(2), math.log(2)) == math.log(2)
    assert tracking_loss(0.2, 0.6) == pytest.approx(0.4, abs=1e-15)


def test_gradients_match_finite_differences(rng):
    for _ in range(10):
        head, pair = random_head_and_pair(rng)
        g = gradients(head, pair)
        fd = finite_difference_grads(head, pair.feat_a, pair.feat_b, pair.label)
        kinks = kink_units(head, pair.feat_a, pair.feat_b)
        assert max_relative_error((g.W1, g.b1, g.W2, g.b2), fd, kinks) <= 1e-4


def test_gradients_vanish_when_saturated_correct(rng):
    head = SiameseHead.init(3, rng)
    head.W2 = np.zeros_like(head.W2)
    head.b2 = 30.0
    g = gradients(head, PairExample(np.ones(3), -np.ones(3), 1))
    assert np.abs(g.W1).max() < 1e-9 and np.abs(g.W2).max() < 1e-9 and abs(g.b2) < 1e-9


def test_gradients_identical_inputs(rng):
    head = SiameseHead.init(6, rng)
    head.b2 = -0.3
    a = rng.normal(size=6)
    for label in (0, 1):
        g = gradients(head, PairExample(a, a, label))
        assert not np.any(g.W1) and not np.any(g.b1)
        assert g.b2 == forward(head, a, a) - label


def _two_frame_graph():
    f0 = np.zeros((8, 8), int)
    f0[1:3, 1:3] = 1
    f0[5:7, 5:7] = 2
    f1 = np.zeros((8, 8), int)
    f1[1:3, 2:4] = 1
    frames = FrameSet([f0, f1])
    graph = LineageGraph.from_frames(frames, [Track(1, 0, 1, 0), Track(2, 0, 0, 0)])
    feats = {(t, lab): (np.full(8, float(lab + t)), np.full(8, float(lab))) for t in range(2) for lab in graph.nodes[t]}
    return frames, graph, feats


def test_build_pairs_single_frame_empty():
    frames, graph, feats = _two_frame_graph()
    one = FrameSet(frames.frames[:1])
    g1 = LineageGraph.from_frames(one, [Track(1, 0, 0, 0), Track(2, 0, 0, 0)])
    assert build_pairs(one, g1, feats, TrainConfig()) == {"visual": [], "spatial": []}


def test_build_pairs_enumeration():
    frames, graph, feats = _two_frame_graph()
    pairs = build_pairs(frames, graph, feats, TrainConfig(seed=3))
    labels = [p.label for p in pairs["visual"]]
    assert labels.count(1) == 1
    assert 1 <= labels.count(0) <= 3
    # all cross-frame pairs: (1@1, 1@0) positive, (1@1, 2@0) negative
    neg = [p for p in pairs["spatial"] if p.label == 0]
    assert [p.feat_b[0] for p in neg] == [2.0]
    again = build_pairs(frames, graph, feats, TrainConfig(seed=3))
    for kind in ("visual", "spatial"):
        for p, q in zip(pairs[kind], again[kind]):
            assert np.array_equal(p.feat_a, q.feat_a) and np.array_equal(p.feat_b, q.feat_b) and p.label == q.label


def test_build_pairs_excludes_parent_for_daughters():
    f0 = np.zeros((8, 8), int)
    f0[2:5, 2:5] = 1
    f0[6:8, 6:8] = 4
    f1 = np.zeros((8, 8), int)
    f1[2:4, 2:4] = 2
    f1[4:6, 4:6] = 3
    f1[6:8, 6:8] = 4
    frames = FrameSet([f0, f1])
    graph = LineageGraph.from_frames(frames, [Track(1, 0, 0, 0), Track(2, 1, 1, 1), Track(3, 1, 1, 1), Track(4, 0, 1, 0)])
    feats = {(t, lab): (np.full(8, 10.0 * t + lab), np.full(8, 10.0 * t + lab)) for t in range(2) for lab in graph.nodes[t]}
    pairs = build_pairs(frames, graph, feats, TrainConfig(seed=0))["visual"]
    for p in pairs:
        tgt, prv = int(p.feat_a[0]) - 10, int(p.feat_b[0])
        if tgt in (2, 3):
            assert prv != 1  # daughter never paired with its parent
        assert p.label == int(tgt == prv)


def _separable_pairs(rng, n=60, dim=4):
    pairs = []
    for _ in range(n):
        a = rng.normal(size=dim)
        pairs.append(PairExample(a, a + rng.normal(0, 0.01, size=dim), 1))
        pairs.append(PairExample(a, a + rng.normal(0, 2.0, size=dim), 0))
    return pairs


def test_training_reduces_loss_over_seeds():
    for seed in range(5):
        rng = np.random.default_rng(seed)
        pairs = {"visual": _separable_pairs(rng), "spatial": _separable_pairs(rng)}
        res = train(init_heads(4, 4, seed), pairs, TrainConfig(seed=seed, epochs=10))
        assert len(res.loss_history) == 10
        assert res.loss_history[-1] < res.loss_history[0]


def test_zero_learning_rate_is_noop():
    rng = np.random.default_rng(0)
    pairs = {"visual": _separable_pairs(rng, 10), "spatial": _separable_pairs(rng, 10)}
    heads = init_heads(4, 4, 0)
    res = train(heads, pairs, TrainConfig(learning_rate=0.0, epochs=4))
    for kind in heads:
        assert res.heads[kind].equals(heads[kind])
    assert len(set(res.loss_history)) == 1


def test_training_deterministic():
    rng = np.random.default_rng(9)
    pairs = {"visual": _separable_pairs(rng, 20), "spatial": _separable_pairs(rng, 20)}
    a = train(init_heads(4, 4, 5), pairs, TrainConfig(seed=5, epochs=3))
    b = train(init_heads(4, 4, 5), pairs, TrainConfig(seed=5, epochs=3))
    assert a.loss_history == b.loss_history
    for kind in ("visual", "spatial"):
        assert a.heads[kind].equals(b.heads[kind])


def test_train_rejects_empty_pairs():
    with pytest.raises(ValueError):
        train(init_heads(4, 4, 0), {"visual": [], "spatial": []}, TrainConfig())


def test_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(momentum=1.0)
    with pytest.raises(ValueError):
        TrainConfig(learning_rate=-1)
    with pytest.raises(DimensionError):
        SiameseHead(3, np.zeros((10, 3)), np.zeros(256), np.zeros(256))
    with pytest.raises(ValueError):
        SiameseHead(1, np.full((256, 1), np.nan), np.zeros(256), np.zeros(256))
