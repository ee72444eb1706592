"""Hand-enumerated AOGM fixtures stored in ``data/aogm_fixtures.json``."""
import json
from pathlib import Path

import numpy as np

from celltrack.core import FrameSet
from celltrack.lineage import LineageGraph, Sequence, Track

FIXTURES = json.loads((Path(__file__).parent / "data" / "aogm_fixtures.json").read_text())


def make_seq(frames, tracks):
    fs = FrameSet([np.array(f, dtype=np.int64) for f in frames])
    return Sequence(fs, LineageGraph.from_frames(fs, [Track(*t) for t in tracks]))
