"""Spatial (relative position) and appearance feature vectors for instances."""
from dataclasses import dataclass

import numpy as np

from .core import LabelMap

VISUAL_DIM = 8

# int64 -> float64 conversion is exact below this bound
_EXACT_INT = 2**53


@dataclass(frozen=True)
class SpatialEncodingConfig:
    n: int = 4
    image_width: int = 1
    image_height: int = 1

    def __post_init__(self):
        if int(self.n) < 1:
            raise ValueError("neighbour count n must be >= 1")
        if self.image_width < 1 or self.image_height < 1:
            raise ValueError("image dimensions must be positive")

    @property
    def dim(self):
        return 2 * self.n


@dataclass(frozen=True, eq=False)
class FeatureVector:
    values: np.ndarray
    kind: str

    def __post_init__(self):
        if self.kind not in ("spatial", "visual"):
            raise ValueError(f"unknown feature kind {self.kind!r}")
        v = np.asarray(self.values, dtype=np.float64).ravel()
        if self.kind == "visual" and v.size != VISUAL_DIM:
            raise ValueError(f"visual vectors have length {VISUAL_DIM}, got {v.size}")
        if self.kind == "spatial" and (v.size == 0 or v.size % 2):
            raise ValueError(f"spatial vectors have even positive length, got {v.size}")
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.values.size

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)


def _encode_one(tsum, tarea, sums, areas, labels, n, width, height):
    """Offsets from one target to its nearest ``n`` neighbours.

    Offsets are formed from integer coordinate sums so that every value is a
    single correctly-rounded division, which makes the encoding invariant to
    integer translations bit for bit.
    """
    out = np.zeros(2 * n)
    if len(areas) == 0:
        return out
    amax = int(areas.max())
    num_bound = int(sums.max()) * tarea + int(tsum.max()) * amax
    den_bound = amax * tarea * max(width, height)
    dtype = np.int64 if max(num_bound, den_bound) < _EXACT_INT else object
    sums = sums.astype(dtype)
    areas = areas.astype(dtype)
    num_x = sums[:, 0] * tarea - int(tsum[0]) * areas
    num_y = sums[:, 1] * tarea - int(tsum[1]) * areas
    den = areas * tarea
    dx = (num_x / den).astype(np.float64)
    dy = (num_y / den).astype(np.float64)
    key = dx * dx + dy * dy
    order = np.lexsort((labels, key))[:n]
    k = len(order)
    out[0:2 * k:2] = (num_x[order] / (den[order] * width)).astype(np.float64)
    out[1:2 * k:2] = (num_y[order] / (den[order] * height)).astype(np.float64)
    return out


def _sums_areas_labels(records):
    sums = np.array([r.coord_sum for r in records], dtype=np.int64).reshape(-1, 2)
    areas = np.array([r.area for r in records], dtype=np.int64)
    labels = np.array([r.label for r in records], dtype=np.int64)
    return sums, areas, labels


def relative_position_encoding(target, others, cfg):
    """Spatial feature of ``target``: normalised offsets to its ``cfg.n`` nearest cells.

    Neighbours are ordered by Euclidean centroid distance, ties by label.
    Each neighbour contributes ``(dx / width, dy / height)`` with offsets taken
    as neighbour minus target; missing neighbours are zero pairs.
    """
    sums, areas, labels = _sums_areas_labels(others)
    vals = _encode_one(
        np.asarray(target.coord_sum, dtype=np.int64), int(target.area),
        sums, areas, labels, int(cfg.n), cfg.image_width, cfg.image_height,
    )
    return FeatureVector(vals, "spatial")


def spatial_matrix(instances, cfg):
    """Row ``i`` is the encoding of ``instances[i]`` against all the others."""
    m = len(instances)
    out = np.zeros((m, 2 * cfg.n))
    if m == 0:
        return out
    sums, areas, labels = _sums_areas_labels(instances)
    idx = np.arange(m)
    for i in range(m):
        rest = idx != i
        out[i] = _encode_one(
            sums[i], int(areas[i]), sums[rest], areas[rest], labels[rest],
            int(cfg.n), cfg.image_width, cfg.image_height,
        )
    return out


def appearance_descriptor(inst, map_, intensity=None):
    """8-value shape/intensity descriptor used as the visual feature.

    ``[area / image area, bbox width / bbox height, area / bbox area,
    mu20, mu02, mu11, mean intensity, intensity std]`` where the central
    moments are divided by ``area**2``. The intensity terms are 0 without an
    intensity image.
    """
    shape = map_.shape if isinstance(map_, LabelMap) else np.shape(map_)
    h, w = shape
    pix = inst.pixels
    if pix is None:
        labels = map_.labels if isinstance(map_, LabelMap) else np.asarray(map_)
        pix = np.flatnonzero(labels.ravel() == inst.label)
    rows = pix // w
    cols = pix % w
    area = float(inst.area)
    x0, y0, x1, y1 = inst.bbox
    bw = x1 - x0 + 1
    bh = y1 - y0 + 1
    cx, cy = inst.centroid
    ddx = cols - cx
    ddy = rows - cy
    a2 = area * area
    mu20 = float(np.sum(ddx * ddx)) / a2
    mu02 = float(np.sum(ddy * ddy)) / a2
    mu11 = float(np.sum(ddx * ddy)) / a2
    mean = std = 0.0
    if intensity is not None:
        vals = np.asarray(intensity, dtype=np.float64).ravel()[pix]
        mean = float(vals.mean())
        std = float(vals.std())
    return FeatureVector(
        np.array([area / (w * h), bw / bh, area / (bw * bh), mu20, mu02, mu11, mean, std]),
        "visual",
    )


def visual_matrix(instances, map_, intensity=None):
    out = np.zeros((len(instances), VISUAL_DIM))
    for i, inst in enumerate(instances):
        out[i] = appearance_descriptor(inst, map_, intensity).values
    return out
