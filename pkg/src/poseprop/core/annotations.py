"""Joint identifiers, annotations with provenance, and the annotation store."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterable, Iterator


class JointId(Enum):
    Head = 0
    LShoulder = 1
    RShoulder = 2
    LElbow = 3
    RElbow = 4
    LWrist = 5
    RWrist = 6

    @property
    def mirror(self) -> "JointId":
        return _MIRROR[self]

    @classmethod
    def parse(cls, name: str) -> "JointId":
        try:
            return cls[name]
        except KeyError:
            raise ValueError(f"unknown joint name {name!r}") from None


_MIRROR = {
    JointId.Head: JointId.Head,
    JointId.LShoulder: JointId.RShoulder,
    JointId.RShoulder: JointId.LShoulder,
    JointId.LElbow: JointId.RElbow,
    JointId.RElbow: JointId.LElbow,
    JointId.LWrist: JointId.RWrist,
    JointId.RWrist: JointId.LWrist,
}

JOINTS = tuple(JointId)
N_JOINTS = len(JOINTS)
# (side name, elbow, wrist)
ARMS = (("L", JointId.LElbow, JointId.LWrist), ("R", JointId.RElbow, JointId.RWrist))


class Origin(Enum):
    Initial = "Initial"
    Spatial = "Spatial"
    Temporal = "Temporal"
    Corrected = "Corrected"
    Consensus = "Consensus"


class Status(Enum):
    Active = "Active"
    Discarded = "Discarded"
    Occluded = "Occluded"


# Annotations of these origins are treated as verified: they are not re-voted
# by consensus and new propagated labels are not added beside them.
SETTLED = frozenset({Origin.Initial, Origin.Consensus, Origin.Corrected})

TEMPORAL_DECAY = 0.98
SPATIAL_DECAY = 0.9


@dataclass(frozen=True)
class Point2:
    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"non-finite point ({self.x}, {self.y})")

    def dist(self, other: "Point2") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)

    def as_tuple(self) -> tuple[float, float]:
        return (self.x, self.y)


@dataclass(frozen=True)
class Provenance:
    origin: Origin
    source_frame: int
    hop_count: int = 0

    def __post_init__(self):
        if (self.hop_count == 0) != (self.origin is Origin.Initial):
            raise ValueError(
                f"hop_count {self.hop_count} inconsistent with origin {self.origin.value}"
            )

    def step(self, origin: Origin) -> "Provenance":
        return Provenance(origin, self.source_frame, self.hop_count + 1)


@dataclass(slots=True)
class Annotation:
    frame: int
    joint: JointId
    pos: Point2
    confidence: float
    provenance: Provenance
    status: Status = Status.Active

    @property
    def origin(self) -> Origin:
        return self.provenance.origin

    @property
    def active(self) -> bool:
        return self.status is Status.Active

    @property
    def settled(self) -> bool:
        return self.provenance.origin in SETTLED

    @classmethod
    def initial(cls, frame: int, joint: JointId, x: float, y: float, confidence=1.0):
        return cls(frame, joint, Point2(x, y), confidence, Provenance(Origin.Initial, frame, 0))

    def key(self):
        """Canonical sort key; used to make merges independent of worker scheduling."""
        p = self.provenance
        return (self.frame, self.joint.value, p.source_frame, p.hop_count, p.origin.value,
                self.pos.x, self.pos.y, self.confidence, self.status.value)


_ALLOWED = {
    Status.Active: {Status.Discarded, Status.Occluded},
    Status.Discarded: set(),
    Status.Occluded: set(),
}


class AnnotationSet:
    """Insertion-ordered annotation store indexed by (frame, joint).

    Several Active annotations may share a (frame, joint) slot until
    consensus resolves them. Status changes are one-way.
    """

    def __init__(self, annotations: Iterable[Annotation] = ()):
        self._items: list[Annotation] = []
        self._index: dict[tuple[int, JointId], list[int]] = {}
        for a in annotations:
            self.add(a)

    def add(self, anno: Annotation) -> int:
        idx = len(self._items)
        self._items.append(anno)
        self._index.setdefault((anno.frame, anno.joint), []).append(idx)
        return idx

    def extend(self, annos: Iterable[Annotation]) -> list[int]:
        return [self.add(a) for a in annos]

    def __len__(self):
        return len(self._items)

    def __iter__(self) -> Iterator[Annotation]:
        return iter(self._items)

    def __getitem__(self, idx: int) -> Annotation:
        return self._items[idx]

    def __eq__(self, other):
        if not isinstance(other, AnnotationSet):
            return NotImplemented
        return self._items == other._items

    def copy(self) -> "AnnotationSet":
        return AnnotationSet(replace(a) for a in self._items)

    def set_status(self, idx: int, status: Status) -> None:
        cur = self._items[idx].status
        if status is cur:
            return
        if status not in _ALLOWED[cur]:
            raise ValueError(f"illegal status transition {cur.value} -> {status.value}")
        self._items[idx].status = status

    def discard(self, idx: int) -> None:
        self.set_status(idx, Status.Discarded)

    def occlude(self, idx: int) -> None:
        self.set_status(idx, Status.Occluded)

    def keys(self):
        """(frame, joint) slots in first-insertion order."""
        return self._index.keys()

    def slot(self, frame: int, joint: JointId, active_only=True) -> list[int]:
        ids = self._index.get((frame, joint), [])
        if active_only:
            return [i for i in ids if self._items[i].active]
        return list(ids)

    def at(self, frame: int, joint: JointId, active_only=True) -> list[Annotation]:
        return [self._items[i] for i in self.slot(frame, joint, active_only)]

    def frame_slice(self, frame: int, active_only=True) -> list[Annotation]:
        out = []
        for j in JointId:
            out.extend(self.at(frame, j, active_only))
        return out

    def active(self) -> list[Annotation]:
        return [a for a in self._items if a.active]

    def n_active(self) -> int:
        return sum(1 for a in self._items if a.active)

    def settled_id(self, frame: int, joint: JointId) -> int | None:
        for i in self.slot(frame, joint):
            if self._items[i].settled:
                return i
        return None

    def settled(self, frame: int, joint: JointId) -> Annotation | None:
        i = self.settled_id(frame, joint)
        return None if i is None else self._items[i]

    def representative_id(self, frame: int, joint: JointId) -> int | None:
        """Settled annotation if present, else the best unsettled Active one."""
        ids = self.slot(frame, joint)
        if not ids:
            return None
        settled = [i for i in ids if self._items[i].settled]
        if settled:
            return settled[0]
        return min(ids, key=lambda i: (-self._items[i].confidence,
                                       self._items[i].provenance.hop_count, i))

    def representative(self, frame: int, joint: JointId) -> Annotation | None:
        i = self.representative_id(frame, joint)
        return None if i is None else self._items[i]

    def frames_with(self, joint: JointId, settled_only=False) -> set[int]:
        out = set()
        for (f, j), ids in self._index.items():
            if j is not joint:
                continue
            for i in ids:
                a = self._items[i]
                if a.active and (a.settled or not settled_only):
                    out.add(f)
                    break
        return out


def coverage(annos: AnnotationSet, joint: JointId, n_frames: int) -> float:
    """Fraction of frames holding at least one Active annotation for ``joint``."""
    if n_frames < 1:
        raise ValueError("n_frames must be >= 1")
    return len(annos.frames_with(joint)) / n_frames


def consensus_cardinality(annos: AnnotationSet, frame: int, joint: JointId) -> int:
    return len({a.provenance.source_frame for a in annos.at(frame, joint)})
