"""Per-joint occlusion detectors: a HOG SVM and an RGB SVM over a square window."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from ..core import AnnotationSet, JointId, Point2
from ..errors import TrainingError
from ..imageproc import extract_patch, hog, rgb_vector
from ..learners import LinearSvm, train_svm

log = logging.getLogger(__name__)

OCCLUSION_JOINTS = (JointId.Head, JointId.LShoulder, JointId.RShoulder,
                    JointId.LElbow, JointId.RElbow)
OFFSET_RANGE = (20.0, 60.0)
OFFSETS_PER_POSITIVE = 4
JITTER_COPIES = 3
JITTER_SIGMA = 5.0
RGB_GRID = 6
OCCLUSION_C = 0.5
MIN_POSITIVES = 5

WRIST_OF = {JointId.LElbow: JointId.LWrist, JointId.RElbow: JointId.RWrist}


@dataclass
class JointDetector:
    joint: JointId
    side: int
    hog_svm: LinearSvm
    rgb_svm: LinearSvm


@dataclass
class OcclusionDetector:
    side: int
    detectors: dict = field(default_factory=dict)  # JointId -> JointDetector

    def get(self, joint: JointId) -> JointDetector | None:
        return self.detectors.get(joint)


def window_features(frame, pos: Point2, side: int):
    patch = extract_patch(frame, pos, side)
    return hog(patch).values, rgb_vector(patch, RGB_GRID).astype(np.float64)


def layout_unoccluded(positions: dict, joint: JointId, side: int) -> bool:
    """Proximity rule: no other annotated joint within side/2 px, and for an
    elbow, its wrist outside the elbow's window."""
    p = positions[joint]
    half = side / 2.0
    for j, q in positions.items():
        if j is not joint and p.dist(q) < half:
            return False
    w = WRIST_OF.get(joint)
    if w is not None and w in positions:
        q = positions[w]
        if abs(q.x - p.x) <= half and abs(q.y - p.y) <= half:
            return False
    return True


def training_positions(annos: AnnotationSet, joint: JointId, side: int, settled_only=True):
    """(frame, pos) of settled annotations passing the layout filter."""
    out = []
    for f in sorted(annos.frames_with(joint, settled_only)):
        layout = {}
        for j in JointId:
            a = annos.settled(f, j) if settled_only else annos.representative(f, j)
            if a is not None:
                layout[j] = a.pos
        if joint in layout and layout_unoccluded(layout, joint, side):
            out.append((f, layout[joint]))
    return out


def train_joint_detector(frames, positives, joint: JointId, side: int, seed: int = 0):
    if len(positives) < MIN_POSITIVES:
        raise TrainingError(f"{joint.name}: {len(positives)} un-occluded samples, need {MIN_POSITIVES}")
    rng = np.random.default_rng(seed)
    H, W = frames.height, frames.width
    ph, pr, nh, nr = [], [], [], []
    for f, p in positives:
        # jittered copies keep the detector tolerant to small localization error
        js = [(0.0, 0.0)] + [tuple(rng.normal(0, JITTER_SIGMA, 2)) for _ in range(JITTER_COPIES)]
        for dx, dy in js:
            q = Point2(min(max(p.x + dx, 0.0), W - 1.0), min(max(p.y + dy, 0.0), H - 1.0))
            h, r = window_features(frames[f], q, side)
            ph.append(h)
            pr.append(r)
        for _ in range(OFFSETS_PER_POSITIVE):
            rad = rng.uniform(*OFFSET_RANGE)
            ang = rng.uniform(0, 2 * math.pi)
            q = Point2(min(max(p.x + rad * math.cos(ang), 0.0), W - 1.0),
                       min(max(p.y + rad * math.sin(ang), 0.0), H - 1.0))
            h, r = window_features(frames[f], q, side)
            nh.append(h)
            nr.append(r)
    return JointDetector(
        joint, side,
        train_svm(ph, nh, C=OCCLUSION_C, seed=seed, feature_space="HOG"),
        train_svm(pr, nr, C=OCCLUSION_C, seed=seed + 1, feature_space="RGB"),
    )


def train_occlusion(annos: AnnotationSet, frames, seed: int = 0, side: int = 33,
                    settled_only=True) -> OcclusionDetector:
    det = OcclusionDetector(side)
    for k, joint in enumerate(OCCLUSION_JOINTS):
        pos = training_positions(annos, joint, side, settled_only)
        try:
            det.detectors[joint] = train_joint_detector(frames, pos, joint, side, seed + 31 * k)
        except TrainingError as exc:
            log.warning("occlusion detector skipped: %s", exc)
    return det


def occlusion_scores(det: JointDetector, frame, pos: Point2):
    h, r = window_features(frame, pos, det.side)
    return det.hog_svm.decision(h), det.rgb_svm.decision(r)


def detect_occlusion(d: OcclusionDetector | JointDetector, frame, joint: JointId, pos: Point2) -> bool:
    """True when the joint is judged occluded: either SVM scores below 0.

    Joints without a trained detector (wrists, or skipped training) are visible.
    """
    jd = d if isinstance(d, JointDetector) else d.get(joint)
    if jd is None:
        return False
    return min(occlusion_scores(jd, frame, pos)) < 0
