"""Siamese-fusion cell tracking and lineage-graph evaluation."""
from ._accel import USE_NUMBA, backend
from .core import FrameSet, InstanceRecord, LabelMap, extract_instances, iou, jaccard_to_matched, overlap_pixels
from .features import (
    FeatureVector,
    SpatialEncodingConfig,
    appearance_descriptor,
    relative_position_encoding,
)
from .lineage import LineageGraph, Sequence, Track
from .metrics import MetricReport, OpWeights, aogm, det_score, evaluate, seg_score, tra_score
from .pipeline import ablation, train_model
from .siamese import PairExample, SiameseHead, TrainConfig, bce_loss, forward, gradients, tracking_loss, train
from .simulator import SimConfig, preset, scenario_library, simulate
from .tracker import TrackerConfig, match_frame, score_matrix, track_sequence

__version__ = "0.1.0"
