"""Label maps, per-instance records and overlap primitives."""
from dataclasses import dataclass, field

import numpy as np


class IncompatibleFramesError(ValueError):
    """Two instances or maps do not share the same image dimensions."""


@dataclass(frozen=True, eq=False)
class LabelMap:
    """2-D grid of instance ids, row-major, 0 = background."""

    labels: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.labels)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"label map must be a non-empty 2-D grid, got shape {arr.shape}")
        if arr.dtype.kind not in "iu":
            if arr.dtype.kind == "b" or not np.all(np.mod(arr, 1) == 0):
                raise ValueError("label map must hold integers")
        arr = arr.astype(np.int64, copy=True)
        if arr.size and arr.min() < 0:
            raise ValueError("labels must be non-negative")
        arr.setflags(write=False)
        object.__setattr__(self, "labels", arr)

    @property
    def height(self):
        return self.labels.shape[0]

    @property
    def width(self):
        return self.labels.shape[1]

    @property
    def shape(self):
        return self.labels.shape

    def unique_labels(self):
        u = np.unique(self.labels)
        return u[u != 0]

    def __eq__(self, other):
        if not isinstance(other, LabelMap):
            return NotImplemented
        return self.shape == other.shape and bool(np.array_equal(self.labels, other.labels))

    __hash__ = None


@dataclass(frozen=True)
class InstanceRecord:
    """One segmented cell in one frame.

    ``centroid`` is ``(x, y)`` with ``x`` the column. ``bbox`` is
    ``(x_min, y_min, x_max, y_max)`` with inclusive bounds. ``coord_sum``
    holds the integer sums of column and row indices, which lets centroid
    differences be formed exactly. ``pixels`` are the sorted flat indices
    into a map of size ``shape``.
    """

    label: int
    frame: int
    centroid: tuple
    bbox: tuple
    area: int
    coord_sum: tuple = field(default=(0, 0), compare=False, repr=False)
    shape: tuple = field(default=(0, 0), compare=False, repr=False)
    pixels: np.ndarray = field(default=None, compare=False, repr=False)

    @classmethod
    def point(cls, label, x, y, frame=0, shape=(1024, 1024)):
        """Single-pixel instance at integer column ``x``, row ``y``."""
        x, y = int(x), int(y)
        return cls(
            label=int(label),
            frame=int(frame),
            centroid=(float(x), float(y)),
            bbox=(x, y, x, y),
            area=1,
            coord_sum=(x, y),
            shape=tuple(shape),
            pixels=np.array([y * shape[1] + x], dtype=np.int64),
        )

    def mask(self):
        m = np.zeros(self.shape[0] * self.shape[1], dtype=bool)
        m[self.pixels] = True
        return m.reshape(self.shape)


@dataclass
class FrameSet:
    """Ordered label maps with optional parallel intensity images in [0, 1]."""

    frames: list
    intensity: list = None

    def __post_init__(self):
        self.frames = [f if isinstance(f, LabelMap) else LabelMap(f) for f in self.frames]
        if self.frames:
            shape = self.frames[0].shape
            for t, f in enumerate(self.frames):
                if f.shape != shape:
                    raise IncompatibleFramesError(f"frame {t} has shape {f.shape}, expected {shape}")
        if self.intensity is not None:
            self.intensity = [np.asarray(im, dtype=np.float64) for im in self.intensity]
            if len(self.intensity) != len(self.frames):
                raise ValueError("intensity list must parallel the label maps")
            for t, im in enumerate(self.intensity):
                if im.shape != self.frames[t].shape:
                    raise IncompatibleFramesError(f"intensity {t} has shape {im.shape}")

    def __len__(self):
        return len(self.frames)

    def __getitem__(self, t):
        return self.frames[t]

    @property
    def shape(self):
        return self.frames[0].shape if self.frames else (0, 0)

    def intensity_at(self, t):
        return None if self.intensity is None else self.intensity[t]


def _as_array(map_):
    return map_.labels if isinstance(map_, LabelMap) else np.asarray(map_, dtype=np.int64)


def extract_instances(map_, frame=0):
    """One :class:`InstanceRecord` per distinct nonzero label, sorted by label."""
    arr = _as_array(map_)
    h, w = arr.shape
    flat = arr.ravel()
    nz = np.flatnonzero(flat)
    if nz.size == 0:
        return []
    order = np.argsort(flat[nz], kind="stable")
    idx = nz[order]
    labs = flat[idx]
    uniq, starts, counts = np.unique(labs, return_index=True, return_counts=True)
    rows = idx // w
    cols = idx % w
    sx = np.add.reduceat(cols, starts)
    sy = np.add.reduceat(rows, starts)
    xmin = np.minimum.reduceat(cols, starts)
    xmax = np.maximum.reduceat(cols, starts)
    ymin = np.minimum.reduceat(rows, starts)
    ymax = np.maximum.reduceat(rows, starts)
    out = []
    for k, lab in enumerate(uniq):
        n = int(counts[k])
        s = int(starts[k])
        out.append(
            InstanceRecord(
                label=int(lab),
                frame=int(frame),
                centroid=(int(sx[k]) / n, int(sy[k]) / n),
                bbox=(int(xmin[k]), int(ymin[k]), int(xmax[k]), int(ymax[k])),
                area=n,
                coord_sum=(int(sx[k]), int(sy[k])),
                shape=(h, w),
                pixels=idx[s:s + n],
            )
        )
    return out


def _pixel_set(x):
    if isinstance(x, InstanceRecord):
        return tuple(x.shape), x.pixels
    m = np.asarray(x, dtype=bool)
    return m.shape, np.flatnonzero(m)


def overlap_pixels(a, b):
    """Number of pixel coordinates shared by two instances (records or boolean masks)."""
    sa, pa = _pixel_set(a)
    sb, pb = _pixel_set(b)
    if sa != sb:
        raise IncompatibleFramesError(f"cannot overlap instances from frames of shape {sa} and {sb}")
    return int(np.intersect1d(pa, pb, assume_unique=True).size)


def iou(a, b):
    """Intersection over union of two pixel sets."""
    inter = overlap_pixels(a, b)
    na = _pixel_set(a)[1].size
    nb = _pixel_set(b)[1].size
    union = na + nb - inter
    return inter / union if union else 0.0


def jaccard_to_matched(gt, res):
    """Jaccard index of a ground-truth object and its matched result object."""
    return iou(gt, res)
