"""File formats and dataset layout.

* label maps: binary 16-bit PGM (``P5``, maxval 65535, big-endian samples)
* intensity images: same container, value ``round(v * 65535)``
* track table: text lines ``"L B E P"`` sorted by label
* model: one JSON document holding both heads and their configs

A sequence directory holds ``mask000.pgm``... , optional ``img000.pgm``...
and ``tracks.txt``.
"""
import json
import re
from pathlib import Path

import numpy as np

from .core import FrameSet, LabelMap
from .features import SpatialEncodingConfig
from .lineage import LineageError, LineageGraph, Sequence, Track
from .siamese import EMBED_DIM, SiameseHead, TrainConfig

MODEL_VERSION = 1
TRACK_FILE = "tracks.txt"
MASK_PATTERN = "mask{:03d}.pgm"
IMAGE_PATTERN = "img{:03d}.pgm"
MAX_FRAMES = 1000


class FormatError(ValueError):
    """A file does not follow its binary or text grammar."""


class ValidationError(ValueError):
    """A well-formed file carries contents that break a data invariant."""


# ---------------------------------------------------------------------------
# PGM


def encode_pgm(values):
    arr = np.asarray(values)
    if arr.ndim != 2:
        raise ValueError("PGM payload must be 2-D")
    if arr.size and (arr.min() < 0 or arr.max() > 65535):
        raise ValidationError("PGM samples must lie in [0, 65535]")
    h, w = arr.shape
    return f"P5\n{w} {h}\n65535\n".encode("ascii") + arr.astype(">u2").tobytes()


def _next_token(data, pos, field):
    n = len(data)
    while pos < n:
        ch = data[pos:pos + 1]
        if ch == b"#":
            while pos < n and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
        elif ch.isspace():
            pos += 1
        else:
            break
    start = pos
    while pos < n and not data[pos:pos + 1].isspace() and data[pos:pos + 1] != b"#":
        pos += 1
    if start == pos:
        raise FormatError(f"PGM header truncated before {field}")
    return data[start:pos], pos


def decode_pgm(data):
    """Parse a 16-bit binary PGM into a ``(height, width)`` int64 array."""
    if data[:2] != b"P5":
        raise FormatError(f"bad magic {data[:2]!r}; expected b'P5'")
    pos = 2
    fields_ = {}
    for field in ("width", "height", "maxval"):
        tok, pos = _next_token(data, pos, field)
        if not tok.isdigit():
            raise FormatError(f"PGM {field} is not a decimal integer: {tok!r}")
        fields_[field] = int(tok)
    if fields_["maxval"] != 65535:
        raise FormatError(f"PGM maxval must be 65535, got {fields_['maxval']}")
    if fields_["width"] < 1 or fields_["height"] < 1:
        raise FormatError("PGM width and height must be positive")
    if pos >= len(data) or not data[pos:pos + 1].isspace():
        raise FormatError("PGM maxval must be followed by a single whitespace byte")
    pos += 1
    w, h = fields_["width"], fields_["height"]
    need = 2 * w * h
    payload = data[pos:]
    if len(payload) < need:
        raise FormatError(f"PGM payload truncated: need {need} bytes, got {len(payload)}")
    if len(payload) > need:
        raise FormatError(f"PGM payload has {len(payload) - need} trailing bytes")
    return np.frombuffer(payload, dtype=">u2").reshape(h, w).astype(np.int64)


def write_labelmap(path, map_):
    labels = map_.labels if isinstance(map_, LabelMap) else np.asarray(map_)
    Path(path).write_bytes(encode_pgm(labels))


def read_labelmap(path):
    return LabelMap(decode_pgm(Path(path).read_bytes()))


def write_intensity(path, image):
    img = np.clip(np.asarray(image, dtype=np.float64), 0.0, 1.0)
    Path(path).write_bytes(encode_pgm(np.rint(img * 65535).astype(np.int64)))


def read_intensity(path):
    return decode_pgm(Path(path).read_bytes()) / 65535.0


# ---------------------------------------------------------------------------
# track table

_TRACK_LINE = re.compile(r"^(\d+) (\d+) (\d+) (\d+)$")


def format_tracktable(tracks):
    tracks = sorted(tracks, key=lambda tr: tr.label)
    return "".join(tr.line() + "\n" for tr in tracks)


def parse_tracktable(text):
    tracks = []
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    elif lines:
        raise FormatError("track table must end with a newline")
    for no, line in enumerate(lines, 1):
        m = _TRACK_LINE.match(line)
        if not m:
            raise FormatError(f"track table line {no}: expected 'L B E P', got {line!r}")
        tracks.append(Track(*(int(g) for g in m.groups())))
    validate_tracks(tracks)
    return tracks


def validate_tracks(tracks):
    seen = {}
    for tr in tracks:
        if tr.label <= 0:
            raise ValidationError(f"track label must be positive, got {tr.label}")
        if tr.label in seen:
            raise ValidationError(f"duplicate track label {tr.label}")
        if tr.begin > tr.end:
            raise ValidationError(f"track {tr.label}: begin {tr.begin} > end {tr.end}")
        seen[tr.label] = tr
    for tr in tracks:
        if tr.parent and tr.parent not in seen:
            raise ValidationError(f"track {tr.label}: unknown parent {tr.parent}")
        if tr.parent == tr.label:
            raise ValidationError(f"track {tr.label} is its own parent")
    labels = [tr.label for tr in tracks]
    if labels != sorted(labels):
        raise ValidationError("track table must be sorted by label")


def write_tracktable(path, tracks):
    Path(path).write_text(format_tracktable(tracks), encoding="ascii", newline="\n")


def read_tracktable(path):
    return parse_tracktable(Path(path).read_text(encoding="ascii"))


# ---------------------------------------------------------------------------
# model


def _head_to_dict(head):
    return {
        "input_dim": head.input_dim,
        "W1": head.W1.tolist(),
        "b1": head.b1.tolist(),
        "W2": head.W2.tolist(),
        "b2": head.b2,
    }


def _head_from_dict(d, kind):
    try:
        dim = d["input_dim"]
        W1, b1, W2, b2 = d["W1"], d["b1"], d["W2"], d["b2"]
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"{kind} head is missing field {exc}") from None
    if not isinstance(dim, int) or dim < 1:
        raise ValidationError(f"{kind} input_dim must be a positive integer")
    if not isinstance(W1, list) or len(W1) != EMBED_DIM:
        raise ValidationError(f"{kind} W1 must have {EMBED_DIM} rows")
    for r, row in enumerate(W1):
        if not isinstance(row, list) or len(row) != dim:
            raise ValidationError(f"{kind} W1 row {r} must have {dim} entries")
    for name, vec in (("b1", b1), ("W2", W2)):
        if not isinstance(vec, list) or len(vec) != EMBED_DIM:
            raise ValidationError(f"{kind} {name} must have {EMBED_DIM} entries")
    if not isinstance(b2, (int, float)) or isinstance(b2, bool):
        raise ValidationError(f"{kind} b2 must be a number")
    try:
        return SiameseHead(dim, np.array(W1, dtype=np.float64), np.array(b1, dtype=np.float64),
                           np.array(W2, dtype=np.float64), float(b2))
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"{kind} head: {exc}") from None


def model_to_json(heads, train_config, encoding_config):
    doc = {
        "version": MODEL_VERSION,
        "visual": _head_to_dict(heads["visual"]),
        "spatial": _head_to_dict(heads["spatial"]),
        "train_config": {
            "learning_rate": train_config.learning_rate,
            "momentum": train_config.momentum,
            "epochs": train_config.epochs,
            "seed": train_config.seed,
            "negatives_per_positive": train_config.negatives_per_positive,
        },
        "encoding_config": {"n": encoding_config.n},
    }
    # repr-based float output round-trips exactly
    return json.dumps(doc, allow_nan=False)


def model_from_json(text):
    """Return ``(heads, train_config, n)`` from a model document."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"model is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise FormatError("model document must be a JSON object")
    if doc.get("version") != MODEL_VERSION:
        raise ValidationError(f"unsupported model version {doc.get('version')!r}; expected {MODEL_VERSION}")
    for key in ("visual", "spatial", "train_config", "encoding_config"):
        if key not in doc:
            raise ValidationError(f"model is missing {key!r}")
    heads = {kind: _head_from_dict(doc[kind], kind) for kind in ("visual", "spatial")}
    try:
        tc = TrainConfig(**doc["train_config"])
        n = int(doc["encoding_config"]["n"])
        SpatialEncodingConfig(n)
    except (TypeError, ValueError, KeyError) as exc:
        raise ValidationError(f"bad model config: {exc}") from None
    if heads["spatial"].input_dim != 2 * n:
        raise ValidationError(f"spatial head input_dim {heads['spatial'].input_dim} != 2 * n ({2 * n})")
    return heads, tc, n


def write_model(path, heads, train_config, encoding_config):
    Path(path).write_text(model_to_json(heads, train_config, encoding_config), encoding="utf-8")


def read_model(path):
    return model_from_json(Path(path).read_text(encoding="utf-8"))


# ---------------------------------------------------------------------------
# dataset layout


def is_sequence_dir(path):
    return (Path(path) / MASK_PATTERN.format(0)).is_file()


def find_sequences(root):
    """``root`` itself if it is a sequence folder, else its sequence subfolders."""
    root = Path(root)
    if is_sequence_dir(root):
        return [root]
    if not root.is_dir():
        raise ValidationError(f"{root} is not a directory")
    subs = sorted(p for p in root.iterdir() if p.is_dir() and is_sequence_dir(p))
    if not subs:
        raise ValidationError(f"no sequence folders (with {MASK_PATTERN.format(0)}) under {root}")
    return subs


def write_sequence(path, seq, write_images=True):
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    if len(seq.frames) > MAX_FRAMES:
        raise ValidationError(f"sequences are limited to {MAX_FRAMES} frames")
    for t, f in enumerate(seq.frames.frames):
        write_labelmap(path / MASK_PATTERN.format(t), f)
    if write_images and seq.frames.intensity is not None:
        for t, im in enumerate(seq.frames.intensity):
            write_intensity(path / IMAGE_PATTERN.format(t), im)
    write_tracktable(path / TRACK_FILE, seq.graph.track_list())


def read_sequence(path, require_tracks=True):
    """Load a sequence folder; validate tracks against the label maps."""
    path = Path(path)
    maps = []
    t = 0
    while (path / MASK_PATTERN.format(t)).is_file():
        maps.append(read_labelmap(path / MASK_PATTERN.format(t)))
        t += 1
    if not maps:
        raise ValidationError(f"{path} holds no {MASK_PATTERN.format(0)}")
    stray = [p.name for p in path.glob("mask*.pgm") if not re.fullmatch(r"mask\d{3}\.pgm", p.name)
             or int(p.name[4:7]) >= len(maps)]
    if stray:
        raise ValidationError(f"mask files are not consecutively numbered: {sorted(stray)}")
    images = None
    if (path / IMAGE_PATTERN.format(0)).is_file():
        images = []
        for t in range(len(maps)):
            p = path / IMAGE_PATTERN.format(t)
            if not p.is_file():
                raise ValidationError(f"missing intensity image {p.name}")
            images.append(read_intensity(p))
    try:
        frames = FrameSet(maps, images)
    except ValueError as exc:
        raise ValidationError(str(exc)) from None
    track_path = path / TRACK_FILE
    if not track_path.is_file():
        if require_tracks:
            raise ValidationError(f"{path} has no {TRACK_FILE}")
        return Sequence(frames, LineageGraph.from_frames(frames, []))
    tracks = read_tracktable(track_path)
    graph = LineageGraph.from_frames(frames, tracks)
    present = set()
    for nodes in graph.nodes:
        present.update(nodes)
    table = {tr.label for tr in tracks}
    if present != table:
        missing = sorted(present - table)[:5]
        extra = sorted(table - present)[:5]
        raise ValidationError(f"track table does not match label maps (unlisted {missing}, absent {extra})")
    try:
        graph.validate()
    except LineageError as exc:
        raise ValidationError(str(exc)) from None
    return Sequence(frames, graph)


def load_json(path):
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON ({exc})") from None
