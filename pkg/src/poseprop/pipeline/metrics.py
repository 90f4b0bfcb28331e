"""Accuracy at d and annotation-set statistics against ground truth."""

from __future__ import annotations

import math

from ..core import AnnotationSet, GroundTruth, JointId, coverage
from ..errors import ArgumentError


def _gt_frames(gt: GroundTruth, joint: JointId, exclude_occluded: bool):
    return [f for f in range(gt.n_frames)
            if gt.has(f, joint) and not (exclude_occluded and gt.is_occluded(f, joint))]


def evaluate_accuracy(preds: dict, gt: GroundTruth, d: float = 20.0, exclude_occluded=True):
    """Per-joint and average percentage of ground-truth joints predicted within ``d`` px.

    ``preds`` maps (frame, joint) to a Point2 or an (x, y, ...) tuple. A
    ground-truth entry without a prediction counts as a miss; distances equal
    to ``d`` count as correct. The average is over joints with any ground truth.
    """
    pred_frames = {f for f, _ in preds}
    gt_frames = {f for f in range(gt.n_frames) if any(gt.has(f, j) for j in JointId)}
    if not pred_frames & gt_frames:
        raise ArgumentError("predictions and ground truth share no frames")
    per = {}
    for j in JointId:
        frames = _gt_frames(gt, j, exclude_occluded)
        if not frames:
            continue
        hit = 0
        for f in frames:
            p = preds.get((f, j))
            if p is None:
                continue
            x, y = (p.x, p.y) if hasattr(p, "x") else (p[0], p[1])
            g = gt.position(f, j)
            if math.hypot(x - g.x, y - g.y) <= d:
                hit += 1
        per[j] = 100.0 * hit / len(frames)
    avg = sum(per.values()) / len(per) if per else 0.0
    return per, avg


def annotation_accuracy(annos: AnnotationSet, gt: GroundTruth, joint: JointId, d: float,
                        exclude_occluded=True) -> float | None:
    """Percentage of annotated frames whose representative annotation lies within ``d``.

    Frames whose ground truth is missing (or occluded, when excluded) are
    ignored; None when no annotated frame is scorable.
    """
    hit = n = 0
    for f in sorted(annos.frames_with(joint)):
        if f >= gt.n_frames or not gt.has(f, joint):
            continue
        if exclude_occluded and gt.is_occluded(f, joint):
            continue
        a = annos.representative(f, joint)
        n += 1
        hit += a.pos.dist(gt.position(f, joint)) <= d
    return 100.0 * hit / n if n else None


def coverage_by_joint(annos: AnnotationSet, n_frames: int) -> dict:
    return {j: coverage(annos, j, n_frames) for j in JointId}
