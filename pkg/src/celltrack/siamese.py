"""Weight-shared similarity heads trained with per-example momentum SGD.

A head embeds both inputs with one dense layer + relu (256 units), takes
the elementwise absolute difference of the embeddings and maps it to a
score in (0, 1) with a second dense layer and a sigmoid.
"""
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .features import FeatureVector

EMBED_DIM = 256
EPS = 1e-7


class DimensionError(ValueError):
    pass


@dataclass(eq=False)
class SiameseHead:
    input_dim: int
    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: float = 0.0

    def __post_init__(self):
        self.W1 = np.ascontiguousarray(self.W1, dtype=np.float64)
        self.b1 = np.ascontiguousarray(self.b1, dtype=np.float64).ravel()
        self.W2 = np.ascontiguousarray(self.W2, dtype=np.float64).ravel()
        self.b2 = float(self.b2)
        self.input_dim = int(self.input_dim)
        if self.W1.shape != (EMBED_DIM, self.input_dim):
            raise DimensionError(f"W1 must be {EMBED_DIM}x{self.input_dim}, got {self.W1.shape}")
        if self.b1.shape != (EMBED_DIM,) or self.W2.shape != (EMBED_DIM,):
            raise DimensionError(f"b1 and W2 must have length {EMBED_DIM}")
        if not (np.all(np.isfinite(self.W1)) and np.all(np.isfinite(self.b1))
                and np.all(np.isfinite(self.W2)) and math.isfinite(self.b2)):
            raise ValueError("head weights must be finite")

    @classmethod
    def init(cls, input_dim, rng):
        """Uniform(+-1/sqrt(fan_in)) weights, zero biases."""
        lim1 = 1.0 / math.sqrt(input_dim)
        lim2 = 1.0 / math.sqrt(EMBED_DIM)
        W1 = rng.uniform(-lim1, lim1, size=(EMBED_DIM, input_dim))
        W2 = rng.uniform(-lim2, lim2, size=EMBED_DIM)
        return cls(input_dim, W1, np.zeros(EMBED_DIM), W2, 0.0)

    @classmethod
    def zeros(cls, input_dim):
        return cls(input_dim, np.zeros((EMBED_DIM, input_dim)), np.zeros(EMBED_DIM), np.zeros(EMBED_DIM), 0.0)

    def copy(self):
        return SiameseHead(self.input_dim, self.W1.copy(), self.b1.copy(), self.W2.copy(), self.b2)

    def equals(self, other):
        return (self.input_dim == other.input_dim and np.array_equal(self.W1, other.W1)
                and np.array_equal(self.b1, other.b1) and np.array_equal(self.W2, other.W2)
                and self.b2 == other.b2)


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.0025
    momentum: float = 0.9
    epochs: int = 40
    seed: int = 0
    negatives_per_positive: int = 3

    def __post_init__(self):
        if not self.learning_rate >= 0:
            raise ValueError("learning_rate must be non-negative")
        if not 0 <= self.momentum < 1:
            raise ValueError("momentum must lie in [0, 1)")
        if self.epochs < 1:
            raise ValueError("epochs must be positive")
        if self.negatives_per_positive < 1:
            raise ValueError("negatives_per_positive must be positive")
        if self.seed < 0:
            raise ValueError("seed must be unsigned")


@dataclass(frozen=True, eq=False)
class PairExample:
    feat_a: np.ndarray
    feat_b: np.ndarray
    label: int

    def __post_init__(self):
        a = np.asarray(self.feat_a, dtype=np.float64).ravel()
        b = np.asarray(self.feat_b, dtype=np.float64).ravel()
        if a.shape != b.shape:
            raise DimensionError("pair members must have equal length")
        if self.label not in (0, 1):
            raise ValueError("pair label must be 0 or 1")
        object.__setattr__(self, "feat_a", a)
        object.__setattr__(self, "feat_b", b)


@dataclass
class Gradients:
    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: float


@dataclass
class TrainResult:
    heads: dict
    loss_history: list = field(default_factory=list)
    visual_history: list = field(default_factory=list)
    spatial_history: list = field(default_factory=list)


def _vec(x):
    return x.values if isinstance(x, FeatureVector) else np.asarray(x, dtype=np.float64).ravel()


def _check_dim(head, v):
    if v.size != head.input_dim:
        raise DimensionError(f"feature length {v.size} does not match head input_dim {head.input_dim}")


def sigmoid(s):
    return kernels._sigmoid(float(s))


def forward(head, a, b):
    """Similarity score of the pair ``(a, b)``; symmetric in its arguments."""
    a, b = _vec(a), _vec(b)
    _check_dim(head, a)
    _check_dim(head, b)
    ea = np.maximum(head.W1 @ a + head.b1, 0.0)
    eb = np.maximum(head.W1 @ b + head.b1, 0.0)
    return sigmoid(head.W2 @ np.abs(ea - eb) + head.b2)


def bce_loss(score, label):
    p = min(max(float(score), EPS), 1.0 - EPS)
    return -(label * math.log(p) + (1 - label) * math.log(1.0 - p))


def tracking_loss(visual_loss, spatial_loss):
    return (visual_loss + spatial_loss) / 2.0


def gradients(head, pair):
    """Exact gradient of ``bce_loss(forward(head, a, b), label)`` w.r.t. all weights."""
    _check_dim(head, pair.feat_a)
    _, _, gW1, gb1, gW2, gb2 = kernels.head_loss_grads(
        head.W1, head.b1, head.W2, head.b2, pair.feat_a, pair.feat_b, float(pair.label), EPS
    )
    return Gradients(gW1, gb1, gW2, float(gb2))


def stack_pairs(pairs):
    """``(A, B, y)`` arrays from a list of :class:`PairExample`."""
    if not pairs:
        raise ValueError("empty pair list")
    A = np.stack([p.feat_a for p in pairs])
    B = np.stack([p.feat_b for p in pairs])
    y = np.array([p.label for p in pairs], dtype=np.float64)
    return A, B, y


def build_pairs(frames, graph, features, cfg):
    """Labelled cross-frame pairs for both feature kinds.

    ``features`` maps ``(frame, label)`` to ``(visual, spatial)`` vectors.
    For each adjacent frame pair, an instance at ``t`` paired with the same
    track at ``t-1`` is a positive. Negatives pair an instance at ``t`` with
    other instances at ``t-1``, excluding its own parent for daughters, at
    most ``negatives_per_positive`` per target and per positive in the frame
    pair. Returns ``{"visual": [...], "spatial": [...]}`` with identical
    pairing in both lists.
    """
    rng = np.random.default_rng(cfg.seed)
    out = {"visual": [], "spatial": []}
    k = cfg.negatives_per_positive
    parents = {tr.label: tr.parent for tr in graph.tracks.values()}
    for t in range(1, len(frames)):
        prev = sorted(graph.nodes[t - 1])
        cur = sorted(graph.nodes[t])
        prev_set = set(prev)
        pos, neg = [], []
        for lab in cur:
            if lab in prev_set:
                pos.append((lab, lab))
            parent = parents.get(lab, 0)
            cands = [p for p in prev if p != lab and p != parent]
            if cands:
                take = min(k, len(cands))
                pick = rng.choice(len(cands), size=take, replace=False)
                neg.extend((lab, cands[j]) for j in sorted(pick))
        cap = k * len(pos)
        if len(neg) > cap:
            keep = np.sort(rng.choice(len(neg), size=cap, replace=False))
            neg = [neg[j] for j in keep]
        for (lab_t, lab_p), y in [(p, 1) for p in pos] + [(n, 0) for n in neg]:
            vis_t, spa_t = features[(t, lab_t)]
            vis_p, spa_p = features[(t - 1, lab_p)]
            out["visual"].append(PairExample(_vec(vis_t), _vec(vis_p), y))
            out["spatial"].append(PairExample(_vec(spa_t), _vec(spa_p), y))
    return out


def train(heads, pairs, cfg):
    """Train copies of ``heads`` on ``pairs`` (both keyed "visual"/"spatial").

    Every epoch visits each head's pairs in a seeded random order with one
    momentum-SGD step per pair. The reported epoch loss is
    ``tracking_loss(mean visual loss, mean spatial loss)`` where the means
    are taken over the losses seen during that epoch.
    """
    rng = np.random.default_rng(cfg.seed)
    trained = {}
    stacked = {}
    state = {}
    for kind in ("visual", "spatial"):
        if not pairs.get(kind):
            raise ValueError(f"no {kind} training pairs")
        head = heads[kind].copy()
        A, B, y = stack_pairs(pairs[kind])
        if A.shape[1] != head.input_dim:
            raise DimensionError(f"{kind} pairs have length {A.shape[1]}, head expects {head.input_dim}")
        stacked[kind] = (np.ascontiguousarray(A), np.ascontiguousarray(B), y)
        b2 = np.array([head.b2])
        vel = (np.zeros_like(head.W1), np.zeros_like(head.b1), np.zeros_like(head.W2), np.zeros(1))
        trained[kind] = head
        state[kind] = (b2, vel)
    result = TrainResult(heads=trained)
    for _ in range(cfg.epochs):
        means = {}
        for kind in ("visual", "spatial"):
            head = trained[kind]
            A, B, y = stacked[kind]
            b2, (vW1, vb1, vW2, vb2) = state[kind]
            order = rng.permutation(len(y)).astype(np.int64)
            losses = kernels.sgd_epoch(
                head.W1, head.b1, head.W2, b2, vW1, vb1, vW2, vb2,
                A, B, y, order, float(cfg.learning_rate), float(cfg.momentum), EPS,
            )
            head.b2 = float(b2[0])
            means[kind] = math.fsum(losses) / len(losses)
        result.visual_history.append(means["visual"])
        result.spatial_history.append(means["spatial"])
        result.loss_history.append(tracking_loss(means["visual"], means["spatial"]))
    for kind, head in trained.items():
        if not (np.all(np.isfinite(head.W1)) and np.all(np.isfinite(head.W2)) and math.isfinite(head.b2)):
            raise FloatingPointError(f"{kind} head diverged during training")
    return result


def init_heads(visual_dim, spatial_dim, seed):
    rng = np.random.default_rng(seed)
    return {"visual": SiameseHead.init(visual_dim, rng), "spatial": SiameseHead.init(spatial_dim, rng)}


__all__ = [
    "EMBED_DIM", "EPS", "DimensionError", "SiameseHead", "TrainConfig", "PairExample",
    "Gradients", "TrainResult", "forward", "bce_loss", "tracking_loss", "gradients",
    "build_pairs", "train", "init_heads", "stack_pairs",
]
