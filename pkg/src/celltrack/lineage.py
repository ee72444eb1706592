"""Tracks and the lineage graph shared by the tracker, simulator and metrics."""
from dataclasses import dataclass, field

from .core import FrameSet, extract_instances


class LineageError(ValueError):
    """A set of tracks or per-frame nodes violates the lineage invariants."""


@dataclass(frozen=True, order=True)
class Track:
    label: int
    begin: int
    end: int
    parent: int = 0

    def line(self):
        return f"{self.label} {self.begin} {self.end} {self.parent}"


@dataclass
class LineageGraph:
    """Tracks keyed by label plus per-frame ``{label: InstanceRecord}`` occupancy."""

    tracks: dict = field(default_factory=dict)
    nodes: list = field(default_factory=list)

    @classmethod
    def from_frames(cls, frames, tracks):
        """Build the graph for ``tracks`` whose nodes come from the label maps."""
        nodes = [{r.label: r for r in extract_instances(f, t)} for t, f in enumerate(frames.frames)]
        return cls({tr.label: tr for tr in tracks}, nodes)

    @property
    def n_frames(self):
        return len(self.nodes)

    def track_list(self):
        return [self.tracks[k] for k in sorted(self.tracks)]

    def edges(self):
        """Directed edges ``((t, label), (t + 1, label2), kind)``.

        ``kind`` is ``"link"`` for consecutive nodes of one track and
        ``"parent"`` from a parent's last node to a daughter's first node.
        """
        out = []
        for tr in self.track_list():
            for t in range(tr.begin, tr.end):
                out.append(((t, tr.label), (t + 1, tr.label), "link"))
            if tr.parent:
                p = self.tracks.get(tr.parent)
                if p is not None:
                    out.append(((p.end, p.label), (tr.begin, tr.label), "parent"))
        return out

    def node_count(self):
        return sum(len(n) for n in self.nodes)

    def validate(self):
        """Raise :class:`LineageError` on the first broken invariant."""
        for lab, tr in self.tracks.items():
            if lab != tr.label or tr.label <= 0:
                raise LineageError(f"bad track label {tr.label}")
            if tr.begin > tr.end:
                raise LineageError(f"track {lab}: begin {tr.begin} > end {tr.end}")
            if tr.begin < 0 or tr.end >= len(self.nodes):
                raise LineageError(f"track {lab}: interval [{tr.begin}, {tr.end}] outside sequence")
            if tr.parent == tr.label:
                raise LineageError(f"track {lab} is its own parent")
            if tr.parent:
                p = self.tracks.get(tr.parent)
                if p is None:
                    raise LineageError(f"track {lab}: unknown parent {tr.parent}")
                if p.end != tr.begin - 1:
                    raise LineageError(f"track {lab} begins at {tr.begin} but parent {p.label} ends at {p.end}")
        for t, frame_nodes in enumerate(self.nodes):
            for lab in frame_nodes:
                tr = self.tracks.get(lab)
                if tr is None:
                    raise LineageError(f"frame {t}: label {lab} has no track")
                if not tr.begin <= t <= tr.end:
                    raise LineageError(f"frame {t}: label {lab} outside its track interval")
        for tr in self.tracks.values():
            for t in range(tr.begin, tr.end + 1):
                if tr.label not in self.nodes[t]:
                    raise LineageError(f"track {tr.label} missing from frame {t}")
        # parents always end before daughters begin, so the parent relation is acyclic
        return self


@dataclass
class Sequence:
    """Label maps paired with their lineage graph."""

    frames: FrameSet
    graph: LineageGraph
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.frames)
