"""Lineage-graph tracking metrics (AOGM, DET, TRA) and segmentation SEG.

Nodes are per-frame objects. A ground-truth object is matched by a result
object covering strictly more than half of its pixels. AOGM is the weighted
count of graph edits turning the result graph into the ground truth:

====  ==========================================  =======
op    meaning                                     default
====  ==========================================  =======
NS    node split (result object covers c >= 2)    5
FN    ground-truth node with no match             10
FP    result node matching nothing                1
ED    result edge with no ground-truth image      1
EA    ground-truth edge missing from the result   1.5
EC    edge present but link/parent kind differs   1
====  ==========================================  =======
"""
import json
from dataclasses import dataclass, field, fields

import numpy as np

from . import kernels
from .core import IncompatibleFramesError

OPS = ("NS", "FN", "FP", "ED", "EA", "EC")


class EmptyGroundTruthError(ValueError):
    pass


@dataclass(frozen=True)
class OpWeights:
    w_ns: float = 5.0
    w_fn: float = 10.0
    w_fp: float = 1.0
    w_ed: float = 1.0
    w_ea: float = 1.5
    w_ec: float = 1.0

    def __post_init__(self):
        for f in fields(self):
            if getattr(self, f.name) < 0:
                raise ValueError(f"weight {f.name} must be non-negative")

    def cost(self, counts):
        return (self.w_ns * counts["NS"] + self.w_fn * counts["FN"] + self.w_fp * counts["FP"]
                + self.w_ed * counts["ED"] + self.w_ea * counts["EA"] + self.w_ec * counts["EC"])

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown weight keys: {sorted(unknown)}")
        return cls(**{k: float(v) for k, v in d.items()})


@dataclass
class MetricReport:
    seg: float
    det: float
    tra: float
    op_counts: dict
    aogm: float
    aogm_empty: float
    aogm_d: float = 0.0
    aogm_d_empty: float = 0.0

    @property
    def d_t(self):
        return self.det - self.tra

    def to_json(self):
        """Single JSON document; reals printed with 6 decimals."""
        ops = ",".join(f'"{k}":{int(self.op_counts[k])}' for k in OPS)
        return (
            "{"
            f'"SEG":{self.seg:.6f},"DET":{self.det:.6f},"TRA":{self.tra:.6f},"D_T":{self.d_t:.6f},'
            f'"ops":{{{ops}}},"AOGM":{self.aogm:.6f},"AOGM_0":{self.aogm_empty:.6f}'
            "}"
        )

    def to_dict(self):
        return json.loads(self.to_json())


@dataclass
class NodeMatch:
    """Matching of one frame: ``gt_to_res[g] = r or None``; ``cover[r] = #gt matched``."""

    gt_to_res: dict
    cover: dict
    inter: dict = field(default_factory=dict)  # (g, r) -> shared pixels for matched pairs


def _labels_areas(flat):
    u, c = np.unique(flat, return_counts=True)
    keep = u != 0
    return u[keep].astype(np.int64), c[keep].astype(np.int64)


def match_frame_nodes(gt_map, res_map):
    """Majority matching of ground-truth objects to result objects in one frame."""
    g = np.ascontiguousarray(np.asarray(getattr(gt_map, "labels", gt_map), dtype=np.int64).ravel())
    r = np.ascontiguousarray(np.asarray(getattr(res_map, "labels", res_map), dtype=np.int64).ravel())
    gs = np.shape(getattr(gt_map, "labels", gt_map))
    rs = np.shape(getattr(res_map, "labels", res_map))
    if gs != rs:
        raise IncompatibleFramesError(f"ground truth {gs} and result {rs} frames differ in size")
    ug, ag = _labels_areas(g)
    ur, _ = _labels_areas(r)
    counts = kernels.pair_counts(g, r, ug, ur)
    gt_to_res, inter = {}, {}
    cover = {int(x): 0 for x in ur}
    for i, lab in enumerate(ug):
        lab = int(lab)
        gt_to_res[lab] = None
        if len(ur) == 0:
            continue
        j = int(np.argmax(counts[i]))
        if 2 * counts[i, j] > ag[i]:
            rl = int(ur[j])
            gt_to_res[lab] = rl
            cover[rl] += 1
            inter[(lab, rl)] = int(counts[i, j])
    return NodeMatch(gt_to_res, cover, inter)


def match_nodes(gt_frame, res_frame):
    """Public alias: ``(gt -> res-or-None mapping, per-result cover counts)``."""
    m = match_frame_nodes(gt_frame, res_frame)
    return m.gt_to_res, m.cover


def _check_pair(gt, res):
    if len(gt.frames) != len(res.frames):
        raise IncompatibleFramesError(f"ground truth has {len(gt.frames)} frames, result has {len(res.frames)}")


def _edge_map(graph):
    return {(a, b): kind for a, b, kind in graph.edges()}


def aogm(gt, res, weights=OpWeights(), node_ops_only=False, matches=None):
    """Weighted graph-edit cost and per-op counts between two sequences."""
    _check_pair(gt, res)
    if matches is None:
        matches = [match_frame_nodes(g, r) for g, r in zip(gt.frames.frames, res.frames.frames)]
    counts = dict.fromkeys(OPS, 0)
    for m in matches:
        for c in m.cover.values():
            if c >= 2:
                counts["NS"] += c - 1
            elif c == 0:
                counts["FP"] += 1
        counts["FN"] += sum(1 for v in m.gt_to_res.values() if v is None)
    if not node_ops_only:
        res_edges = _edge_map(res.graph)
        induced = set()
        for (t1, g1), (t2, g2), kind in gt.graph.edges():
            r1 = matches[t1].gt_to_res.get(g1)
            r2 = matches[t2].gt_to_res.get(g2)
            if r1 is None or r2 is None:
                counts["EA"] += 1
                continue
            key = ((t1, r1), (t2, r2))
            induced.add(key)
            rk = res_edges.get(key)
            if rk is None:
                counts["EA"] += 1
            elif rk != kind:
                counts["EC"] += 1
        counts["ED"] += sum(1 for key in res_edges if key not in induced)
    return weights.cost(counts), counts


def _gt_node_count(gt):
    n = sum(len(np.setdiff1d(np.unique(f.labels), [0])) for f in gt.frames.frames)
    if n == 0:
        raise EmptyGroundTruthError("ground truth contains no objects")
    return n


def det_score(gt, res, weights=OpWeights()):
    cost, _ = aogm(gt, res, weights, node_ops_only=True)
    empty = weights.w_fn * _gt_node_count(gt)
    return 1.0 - min(cost, empty) / empty


def tra_score(gt, res, weights=OpWeights()):
    cost, _ = aogm(gt, res, weights)
    empty = weights.w_fn * _gt_node_count(gt) + weights.w_ea * len(gt.graph.edges())
    return 1.0 - min(cost, empty) / empty


def _seg_terms(gt_frames, res_frames, matches=None):
    total, n = 0.0, 0
    for t, (g, r) in enumerate(zip(gt_frames.frames, res_frames.frames)):
        m = matches[t] if matches is not None else match_frame_nodes(g, r)
        ug, ag = _labels_areas(g.labels.ravel())
        ur, ar = _labels_areas(r.labels.ravel())
        res_area = dict(zip(ur.tolist(), ar.tolist()))
        for lab, area in zip(ug.tolist(), ag.tolist()):
            n += 1
            rl = m.gt_to_res[lab]
            if rl is not None:
                inter = m.inter[(lab, rl)]
                total += inter / (area + res_area[rl] - inter)
    return total, n


def seg_score(gt_frames, res_frames):
    """Mean Jaccard index of ground-truth objects against their matched result objects."""
    if len(gt_frames) != len(res_frames):
        raise IncompatibleFramesError("frame counts differ")
    total, n = _seg_terms(gt_frames, res_frames)
    if n == 0:
        raise EmptyGroundTruthError("ground truth contains no objects")
    return total / n


def evaluate(gt, res, weights=OpWeights()):
    """Full :class:`MetricReport` for one sequence or a list of sequence pairs.

    Lists are pooled: op counts, costs and normalisers are summed before
    forming DET/TRA, and SEG averages over all ground-truth objects.
    """
    pairs = list(zip(gt, res)) if isinstance(gt, (list, tuple)) else [(gt, res)]
    counts = dict.fromkeys(OPS, 0)
    cost = cost_d = empty = empty_d = 0.0
    seg_total, seg_n = 0.0, 0
    for g, r in pairs:
        _check_pair(g, r)
        matches = [match_frame_nodes(a, b) for a, b in zip(g.frames.frames, r.frames.frames)]
        c, ops = aogm(g, r, weights, matches=matches)
        cd, _ = aogm(g, r, weights, node_ops_only=True, matches=matches)
        nodes = sum(len(m.gt_to_res) for m in matches)
        cost += c
        cost_d += cd
        empty += weights.w_fn * nodes + weights.w_ea * len(g.graph.edges())
        empty_d += weights.w_fn * nodes
        for k in OPS:
            counts[k] += ops[k]
        st, sn = _seg_terms(g.frames, r.frames, matches)
        seg_total += st
        seg_n += sn
    if seg_n == 0 or empty_d == 0:
        raise EmptyGroundTruthError("ground truth contains no objects")
    det = 1.0 - min(cost_d, empty_d) / empty_d
    tra = 1.0 - min(cost, empty) / empty
    return MetricReport(seg_total / seg_n, det, tra, counts, cost, empty, cost_d, empty_d)
