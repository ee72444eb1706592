"""Frame-by-frame identity assignment with visual/spatial score fusion.

For every instance in frame t the visual and spatial heads score all
instances of frame t-1. When both argmaxes point at the same previous
instance that identity is taken; otherwise the previous instance with the
largest IoU is taken, unless that IoU is below ``alpha``, in which case the
instance starts a new track. Previous instances claimed by two or more
targets are treated as dividing: they end, and each claimant starts a
daughter track.
"""
import warnings
from dataclasses import dataclass, replace

import numpy as np

from . import kernels
from .core import FrameSet, extract_instances
from .features import FeatureVector, SpatialEncodingConfig, spatial_matrix, visual_matrix
from .lineage import LineageGraph, Sequence, Track
from .siamese import DimensionError

MODES = ("fusion", "visual", "spatial")


class MitosisWarning(UserWarning):
    """More than two targets were assigned to one previous cell."""


@dataclass(frozen=True)
class TrackerConfig:
    alpha: float = 0.1
    n: int = 4
    min_score: float = 0.0
    mode: str = "fusion"

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        if not 0.0 <= self.min_score <= 1.0:
            raise ValueError("min_score must lie in [0, 1]")
        if self.n < 1:
            raise ValueError("n must be positive")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")


@dataclass(frozen=True)
class Decision:
    kind: str  # "continue", "new" or "daughter"
    prev: int = -1  # column index into the previous frame's instances

    @classmethod
    def new(cls):
        return cls("new")


def _as_matrix(feats, dim):
    if isinstance(feats, np.ndarray):
        m = np.asarray(feats, dtype=np.float64)
        if m.ndim == 1:
            m = m.reshape(0, dim) if m.size == 0 else m.reshape(1, -1)
    else:
        rows = [f.values if isinstance(f, FeatureVector) else np.asarray(f, dtype=np.float64).ravel() for f in feats]
        m = np.stack(rows) if rows else np.zeros((0, dim))
    if m.shape[1] != dim:
        raise DimensionError(f"features have length {m.shape[1]}, head expects {dim}")
    return np.ascontiguousarray(m)


def score_matrix(head, feats_t, feats_prev):
    """``S[i, j] = forward(head, feats_t[i], feats_prev[j])``."""
    X = _as_matrix(feats_t, head.input_dim)
    Y = _as_matrix(feats_prev, head.input_dim)
    if X.shape[0] == 0 or Y.shape[0] == 0:
        return np.zeros((X.shape[0], Y.shape[0]))
    return kernels.pair_scores(head.W1, head.b1, head.W2, head.b2, X, Y)


def iou_matrix(map_t, inst_t, map_prev, inst_prev):
    """IoU between every instance of frame t (rows) and frame t-1 (columns)."""
    ua = np.array([r.label for r in inst_t], dtype=np.int64)
    ub = np.array([r.label for r in inst_prev], dtype=np.int64)
    counts = kernels.pair_counts(
        np.ascontiguousarray(map_t.labels.ravel()), np.ascontiguousarray(map_prev.labels.ravel()), ua, ub
    )
    area_a = np.array([r.area for r in inst_t], dtype=np.int64)
    area_b = np.array([r.area for r in inst_prev], dtype=np.int64)
    union = area_a[:, None] + area_b[None, :] - counts
    return counts / np.maximum(union, 1)


def match_frame(instances_t, instances_prev, vis_scores, spa_scores, overlaps, cfg):
    """Per-target :class:`Decision` list for one frame transition."""
    m, k = len(instances_t), len(instances_prev)
    if k == 0:
        return [Decision.new() for _ in range(m)]
    vis = np.asarray(vis_scores) if vis_scores is not None else None
    spa = np.asarray(spa_scores) if spa_scores is not None else None
    ov = np.asarray(overlaps)
    for name, mat in (("visual", vis), ("spatial", spa), ("overlap", ov)):
        if mat is not None and mat.shape != (m, k):
            raise DimensionError(f"{name} matrix has shape {mat.shape}, expected {(m, k)}")
    candidate = np.full(m, -1, dtype=np.int64)
    for i in range(m):
        if cfg.mode == "fusion":
            jv = int(np.argmax(vis[i]))
            js = int(np.argmax(spa[i]))
            if jv == js and vis[i, jv] >= cfg.min_score:
                candidate[i] = jv
                continue
            jo = int(np.argmax(ov[i]))
            if ov[i, jo] >= cfg.alpha:
                candidate[i] = jo
        else:
            mat = vis if cfg.mode == "visual" else spa
            j = int(np.argmax(mat[i]))
            if mat[i, j] >= cfg.min_score:
                candidate[i] = j
    groups = np.bincount(candidate[candidate >= 0], minlength=k)
    decisions = []
    for i in range(m):
        j = int(candidate[i])
        if j < 0:
            decisions.append(Decision.new())
        elif groups[j] == 1:
            decisions.append(Decision("continue", j))
        else:
            decisions.append(Decision("daughter", j))
    for j in np.flatnonzero(groups >= 3):
        warnings.warn(
            f"{groups[j]} targets matched previous instance {instances_prev[j].label}; all treated as daughters",
            MitosisWarning,
            stacklevel=2,
        )
    return decisions


def _relabel(labels, src, dst):
    out = np.zeros_like(labels)
    if len(src) == 0:
        return out
    order = np.argsort(src)
    src, dst = np.asarray(src)[order], np.asarray(dst)[order]
    flat = labels.ravel()
    nz = flat != 0
    out.ravel()[nz] = dst[np.searchsorted(src, flat[nz])]
    return out


def track_sequence(frames, heads, cfg=TrackerConfig()):
    """Track every frame of ``frames`` and return the tracked :class:`Sequence`.

    Output label maps carry track labels. ``heads`` maps "visual" and
    "spatial" to :class:`~celltrack.siamese.SiameseHead`; a head unused by
    ``cfg.mode`` may be omitted.
    """
    if not isinstance(frames, FrameSet):
        frames = FrameSet(frames)
    if len(frames) == 0:
        raise ValueError("cannot track an empty frame set")
    h, w = frames.shape
    enc = SpatialEncodingConfig(cfg.n, w, h)
    need_vis = cfg.mode in ("fusion", "visual")
    need_spa = cfg.mode in ("fusion", "spatial")
    if need_spa and heads["spatial"].input_dim != enc.dim:
        raise DimensionError(f"spatial head expects {heads['spatial'].input_dim} inputs, encoding with n={cfg.n} gives {enc.dim}")

    tracks = {}
    nodes = []
    out_maps = []
    next_label = 1
    prev = None  # (instances, visual feats, spatial feats, track labels, map)
    for t, lmap in enumerate(frames.frames):
        inst = extract_instances(lmap, t)
        vis = visual_matrix(inst, lmap, frames.intensity_at(t)) if need_vis else None
        spa = spatial_matrix(inst, enc) if need_spa else None
        if prev is None or not prev[0]:
            decisions = [Decision.new() for _ in inst]
        else:
            p_inst, p_vis, p_spa, _, p_map = prev
            vs = score_matrix(heads["visual"], vis, p_vis) if need_vis else None
            ss = score_matrix(heads["spatial"], spa, p_spa) if need_spa else None
            ov = iou_matrix(lmap, inst, p_map, p_inst) if cfg.mode == "fusion" else np.zeros((len(inst), len(p_inst)))
            decisions = match_frame(inst, p_inst, vs, ss, ov, cfg)
        labels = []
        for dec in decisions:
            if dec.kind == "continue":
                lab = prev[3][dec.prev]
                tracks[lab][1] = t
            else:
                lab = next_label
                next_label += 1
                parent = prev[3][dec.prev] if dec.kind == "daughter" else 0
                tracks[lab] = [t, t, parent]
            labels.append(lab)
        nodes.append({lab: replace(r, label=lab) for lab, r in zip(labels, inst)})
        out_maps.append(_relabel(lmap.labels, [r.label for r in inst], labels))
        prev = (inst, vis, spa, labels, lmap)

    graph = LineageGraph({lab: Track(lab, b, e, p) for lab, (b, e, p) in sorted(tracks.items())}, nodes)
    out = FrameSet(out_maps, None if frames.intensity is None else list(frames.intensity))
    return Sequence(out, graph)
