"""Frame sequences, ground truth tables and person-scale normalization."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import cv2
import numpy as np

from .annotations import AnnotationSet, JointId, N_JOINTS, Origin, Point2

TARGET_SHOULDER_WIDTH = 100.0


class FrameStore:
    """An ordered RGB uint8 frame stack of shape (n, height, width, 3)."""

    def __init__(self, frames, scale_factor: float = 1.0):
        frames = np.asarray(frames)
        if frames.ndim != 4 or frames.shape[-1] != 3:
            raise ValueError(f"expected (n, h, w, 3) frames, got shape {frames.shape}")
        if frames.dtype != np.uint8:
            frames = np.clip(np.rint(frames), 0, 255).astype(np.uint8)
        self.frames = frames
        self.scale_factor = float(scale_factor)
        self._gray = None

    def __len__(self):
        return self.frames.shape[0]

    def __getitem__(self, i):
        return self.frames[i]

    @property
    def height(self) -> int:
        return self.frames.shape[1]

    @property
    def width(self) -> int:
        return self.frames.shape[2]

    def in_bounds(self, x: float, y: float) -> bool:
        return 0.0 <= x <= self.width - 1 and 0.0 <= y <= self.height - 1

    def clamp(self, x: float, y: float) -> tuple[float, float]:
        return (min(max(x, 0.0), self.width - 1.0), min(max(y, 0.0), self.height - 1.0))

    def gray(self, i: int) -> np.ndarray:
        return cv2.cvtColor(self.frames[i], cv2.COLOR_RGB2GRAY).astype(np.float32)

    def rescaled(self, factor: float) -> "FrameStore":
        if factor == 1.0:
            return FrameStore(self.frames, self.scale_factor)
        h = max(1, int(round(self.height * factor)))
        w = max(1, int(round(self.width * factor)))
        interp = cv2.INTER_AREA if factor < 1 else cv2.INTER_LINEAR
        out = np.stack([cv2.resize(f, (w, h), interpolation=interp) for f in self.frames])
        return FrameStore(out, self.scale_factor * factor)

    @classmethod
    def from_dir(cls, path) -> "FrameStore":
        path = Path(path)
        files = sorted(p for p in path.iterdir() if p.suffix.lower() in (".png", ".jpg", ".jpeg"))
        if not files:
            raise FileNotFoundError(f"no image frames in {path}")
        frames = []
        for p in files:
            img = cv2.imread(str(p), cv2.IMREAD_COLOR)
            if img is None:
                raise OSError(f"cannot read image {p}")
            frames.append(cv2.cvtColor(img, cv2.COLOR_BGR2RGB))
        shapes = {f.shape for f in frames}
        if len(shapes) != 1:
            raise ValueError(f"frames in {path} have differing sizes: {sorted(shapes)}")
        return cls(np.stack(frames))

    def write_dir(self, path, prefix="frame_") -> list[Path]:
        path = Path(path)
        path.mkdir(parents=True, exist_ok=True)
        digits = max(5, len(str(len(self))))
        out = []
        for i, f in enumerate(self.frames):
            p = path / f"{prefix}{i:0{digits}d}.png"
            if not cv2.imwrite(str(p), cv2.cvtColor(f, cv2.COLOR_RGB2BGR)):
                raise OSError(f"cannot write {p}")
            out.append(p)
        return out


@dataclass
class GroundTruth:
    """Per-frame joint positions (NaN where unknown) and occlusion flags."""

    positions: np.ndarray  # (n_frames, 7, 2) float64
    occluded: np.ndarray  # (n_frames, 7) bool

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=np.float64)
        self.occluded = np.asarray(self.occluded, dtype=bool)
        if self.positions.shape[1:] != (N_JOINTS, 2) or self.occluded.shape != self.positions.shape[:2]:
            raise ValueError("ground truth arrays have inconsistent shapes")

    @classmethod
    def empty(cls, n_frames: int) -> "GroundTruth":
        return cls(np.full((n_frames, N_JOINTS, 2), np.nan), np.zeros((n_frames, N_JOINTS), bool))

    @property
    def n_frames(self) -> int:
        return self.positions.shape[0]

    def has(self, frame: int, joint: JointId) -> bool:
        return bool(np.all(np.isfinite(self.positions[frame, joint.value])))

    def position(self, frame: int, joint: JointId) -> Point2 | None:
        if not self.has(frame, joint):
            return None
        x, y = self.positions[frame, joint.value]
        return Point2(float(x), float(y))

    def is_occluded(self, frame: int, joint: JointId) -> bool:
        return bool(self.occluded[frame, joint.value])

    def frames(self) -> list[int]:
        """Frames with at least one labelled joint."""
        ok = np.isfinite(self.positions).all(axis=2).any(axis=1)
        return [int(i) for i in np.flatnonzero(ok)]

    def scaled(self, factor: float) -> "GroundTruth":
        return GroundTruth(self.positions * factor, self.occluded.copy())


def shoulder_widths(annos: AnnotationSet) -> list[float]:
    out = []
    frames = {a.frame for a in annos if a.origin is Origin.Initial and a.active}
    for f in sorted(frames):
        ls = [a for a in annos.at(f, JointId.LShoulder) if a.origin is Origin.Initial]
        rs = [a for a in annos.at(f, JointId.RShoulder) if a.origin is Origin.Initial]
        if ls and rs:
            out.append(ls[0].pos.dist(rs[0].pos))
    return out


def normalization_factor(annos: AnnotationSet, fallback: float = 1.0, tolerance=0.05) -> float:
    """Scale that brings the median initial shoulder width to ~100 px.

    Returns 1.0 when the width is already within ``tolerance`` of the target,
    and ``fallback`` when no frame has both shoulders annotated.
    """
    widths = shoulder_widths(annos)
    if not widths:
        return float(fallback)
    med = float(np.median(widths))
    if med <= 0:
        return float(fallback)
    factor = TARGET_SHOULDER_WIDTH / med
    if abs(factor - 1.0) <= tolerance:
        return 1.0
    return factor


def scale_annotations(annos: AnnotationSet, factor: float) -> AnnotationSet:
    out = annos.copy()
    if factor == 1.0:
        return out
    for a in out:
        a.pos = Point2(a.pos.x * factor, a.pos.y * factor)
    return out
