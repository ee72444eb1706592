"""Glue between simulation, training, tracking and evaluation."""
import numpy as np

from .features import VISUAL_DIM, SpatialEncodingConfig, spatial_matrix, visual_matrix
from .metrics import OpWeights, evaluate
from .siamese import TrainConfig, build_pairs, init_heads, train
from .tracker import TrackerConfig, track_sequence


def sequence_features(seq, n=4):
    """``{(t, label): (visual, spatial)}`` for every ground-truth node."""
    h, w = seq.frames.shape
    enc = SpatialEncodingConfig(n, w, h)
    out = {}
    for t, nodes in enumerate(seq.graph.nodes):
        inst = [nodes[k] for k in sorted(nodes)]
        if not inst:
            continue
        vis = visual_matrix(inst, seq.frames[t], seq.frames.intensity_at(t))
        spa = spatial_matrix(inst, enc)
        for i, r in enumerate(inst):
            out[(t, r.label)] = (vis[i], spa[i])
    return out


def collect_pairs(sequences, cfg, n=4):
    """Training pairs pooled over ``sequences`` in order."""
    pairs = {"visual": [], "spatial": []}
    for s, seq in enumerate(sequences):
        # each sequence gets its own stream so adding data never reshuffles earlier pairs
        sub = TrainConfig(cfg.learning_rate, cfg.momentum, cfg.epochs, cfg.seed + s, cfg.negatives_per_positive)
        got = build_pairs(seq.frames, seq.graph, sequence_features(seq, n), sub)
        pairs["visual"].extend(got["visual"])
        pairs["spatial"].extend(got["spatial"])
    return pairs


def train_model(sequences, cfg=TrainConfig(), n=4):
    """Initialise both heads from ``cfg.seed`` and train on ``sequences``."""
    if not isinstance(sequences, (list, tuple)):
        sequences = [sequences]
    pairs = collect_pairs(sequences, cfg, n)
    if not pairs["visual"]:
        raise ValueError("training data yields no cross-frame pairs (need >= 2 frames with cells)")
    heads = init_heads(VISUAL_DIM, 2 * n, cfg.seed)
    return train(heads, pairs, cfg)


def ablation(sequences, heads, cfg=TrackerConfig(), weights=OpWeights()):
    """Track under each assignment mode and score against the ground truth.

    ``sequences`` is one ground-truth sequence or a list (scores pooled).
    """
    if not isinstance(sequences, (list, tuple)):
        sequences = [sequences]
    out = {}
    for mode in ("fusion", "visual", "spatial"):
        mcfg = TrackerConfig(cfg.alpha, cfg.n, cfg.min_score, mode)
        results = [track_sequence(seq.frames, heads, mcfg) for seq in sequences]
        out[mode] = evaluate(list(sequences), results, weights)
    return out


def ablation_json(reports):
    body = ",".join(f'"{mode}":{rep.to_json()}' for mode, rep in reports.items())
    return "{" + body + "}"


def mean_gap(reports):
    return float(np.mean([r.d_t for r in reports]))
