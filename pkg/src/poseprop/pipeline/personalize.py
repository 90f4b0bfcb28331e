"""Video-specific detector trained on the propagated annotations."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core import AnnotationSet, JointId, PipelineConfig, Point2, derive_seed
from ..errors import PipelineError, TrainingError
from ..imageproc import WindowFeatures
from ..learners import RandomForest
from ..spatial import train_joint_forest

TRAIN_JITTER = 1


@dataclass
class PersonalizedDetector:
    forest: RandomForest
    stride: int
    untrainable: tuple = ()  # joints with no training annotation


def personalize(annos: AnnotationSet, frames, cfg: PipelineConfig, seed: int = 0) -> PersonalizedDetector:
    """Forest over every settled annotation, with one-pixel jitter copies."""
    missing = tuple(j for j in JointId if not annos.frames_with(j, settled_only=True))
    if len(missing) == len(JointId):
        raise PipelineError("no joint has a settled annotation to train on")
    try:
        forest = train_joint_forest(annos, frames, cfg, derive_seed(seed, 61),
                                    settled_only=True, jitter=TRAIN_JITTER)
    except TrainingError as exc:
        raise PipelineError(f"personalized detector: {exc}") from exc
    return PersonalizedDetector(forest, cfg.detector_stride, missing)


def predict_frame(det: PersonalizedDetector, frame) -> dict:
    """{joint: (Point2, confidence)}: coarse argmax on the stride grid, then a
    one-pixel search around it. Joints the forest lacks get confidence 0."""
    forest = det.forest
    maps, xs, ys = forest.probability_maps(frame, det.stride)
    h, w = np.asarray(frame).shape[:2]
    wf = WindowFeatures(frame, forest.params.windows, forest.params.grid)
    s = det.stride
    out = {}
    for j in JointId:
        if not forest.has_joint(j):
            out[j] = (Point2((w - 1) / 2.0, (h - 1) / 2.0), 0.0)
            continue
        col = forest.column(j)
        iy, ix = np.unravel_index(int(np.argmax(maps[col])), maps[col].shape)
        cx, cy = xs[ix], ys[iy]
        if s > 1:
            r = s // 2
            ox = np.arange(max(0, cx - r), min(w - 1, cx + r) + 1)
            oy = np.arange(max(0, cy - r), min(h - 1, cy + r) + 1)
            gx, gy = np.meshgrid(ox, oy)
            p = forest.proba(wf.features(gx.ravel(), gy.ravel()))[:, col]
            # ties resolve to the first (row-major) position
            k = int(np.argmax(p))
            out[j] = (Point2(float(gx.ravel()[k]), float(gy.ravel()[k])), float(p[k]))
        else:
            out[j] = (Point2(float(cx), float(cy)), float(maps[col][iy, ix]))
    return out


def predict_all(det: PersonalizedDetector, frames) -> dict:
    """{(frame, joint): (Point2, confidence)} for every frame and joint."""
    out = {}
    for f in range(len(frames)):
        for j, v in predict_frame(det, frames[f]).items():
            out[(f, j)] = v
    return out


def predictions_as_points(preds: dict) -> dict:
    return {k: v[0] for k, v in preds.items()}
