"""Lower-arm puppet: rectified limb crops classified by a HOG SVM and an RGB SVM."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from ..core import ARMS, AnnotationSet, JointId, Point2
from ..errors import ArgumentError, TrainingError
from ..imageproc import as_float, bilinear_sample, hog, rgb_vector
from ..learners import LinearSvm, train_svm

log = logging.getLogger(__name__)

OFFSET_RANGE = (15.0, 60.0)
OFFSETS_PER_POSITIVE = 6
RGB_GRID = (12, 6)
PUPPET_C = 0.5
# positives are also sampled with both endpoints jittered, so small annotation
# noise still passes
JITTER_COPIES = 2
JITTER_SIGMA = 3.0


@dataclass
class PuppetArm:
    side: str
    length: float  # nominal elbow-wrist length in px
    width: float
    out_len: int
    out_width: int
    hog_svm: LinearSvm
    rgb_svm: LinearSvm


@dataclass
class PuppetModel:
    arms: dict  # side -> PuppetArm | None

    def arm(self, side: str) -> PuppetArm | None:
        return self.arms.get(side)


def limb_rectangle(elbow: Point2, wrist: Point2, width: float) -> np.ndarray:
    """Corners (4, 2) of the oriented rectangle spanning elbow -> wrist."""
    e = np.array(elbow.as_tuple())
    w = np.array(wrist.as_tuple())
    d = w - e
    L = math.hypot(*d)
    if L == 0:
        raise ValueError("zero-length limb")
    u = d / L
    n = np.array((-u[1], u[0]))
    h = width / 2.0
    return np.array([e - n * h, w - n * h, w + n * h, e + n * h])


def canonical_length(nominal: float, cell: int = 8) -> int:
    return max(2, int(round(nominal / cell))) * cell + 1


def canonical_width(width: float, cell: int = 8) -> int:
    return max(1, int(round(width / cell))) * cell + 1


def rectify(frame, elbow: Point2, wrist: Point2, width: float, out_len: int, out_width: int):
    """Resample the limb rectangle to (out_len, out_width, 3); row 0 at the elbow.

    The limb axis is always stretched to ``out_len`` rows, so a foreshortened
    limb is magnified along its axis while the width scale stays fixed.
    """
    e = np.array(elbow.as_tuple())
    w = np.array(wrist.as_tuple())
    d = w - e
    L = math.hypot(*d)
    if L == 0:
        return None
    u = d / L
    n = np.array((-u[1], u[0]))
    t = np.linspace(0.0, 1.0, out_len)
    v = np.linspace(-width / 2.0, width / 2.0, out_width)
    px = e[0] + t[:, None] * d[0] + v[None, :] * n[0]
    py = e[1] + t[:, None] * d[1] + v[None, :] * n[1]
    return bilinear_sample(as_float(frame), px, py).astype(np.float32)


def limb_features(crop):
    return hog(crop).values, rgb_vector(crop, RGB_GRID).astype(np.float64)


def _offset(rng, p: Point2, W, H):
    r = rng.uniform(*OFFSET_RANGE)
    a = rng.uniform(0, 2 * math.pi)
    x = min(max(p.x + r * math.cos(a), 0.0), W - 1.0)
    y = min(max(p.y + r * math.sin(a), 0.0), H - 1.0)
    return Point2(x, y)


def lower_arm_pairs(annos: AnnotationSet, side: str, settled_only=True):
    """(frame, elbow, wrist) for frames holding both joints of one arm."""
    _, ej, wj = next(a for a in ARMS if a[0] == side)
    out = []
    frames = sorted(annos.frames_with(wj, settled_only) & annos.frames_with(ej, settled_only))
    for f in frames:
        e = annos.settled(f, ej) if settled_only else annos.representative(f, ej)
        w = annos.settled(f, wj) if settled_only else annos.representative(f, wj)
        if e is not None and w is not None:
            out.append((f, e.pos, w.pos))
    return out


def train_puppet_arm(frames, pairs, side: str, swap_wrists: dict, seed: int = 0,
                     width: float = 24.0, min_pairs: int = 10) -> PuppetArm:
    """Train one arm's SVM pair.

    ``pairs`` are (frame, elbow, wrist) positives; ``swap_wrists`` maps a frame
    to the opposite arm's wrist for hand-swap negatives.
    """
    if len(pairs) < min_pairs:
        raise TrainingError(f"{side} arm: {len(pairs)} limb pairs, need {min_pairs}")
    rng = np.random.default_rng(seed)
    lengths = [e.dist(w) for _, e, w in pairs if e.dist(w) > 0]
    nominal = float(np.median(lengths))
    out_len, out_w = canonical_length(nominal), canonical_width(width)
    H, W = frames.height, frames.width
    pos_h, pos_r, neg_h, neg_r = [], [], [], []

    def add(f, e, w, target_h, target_r):
        crop = rectify(frames[f], e, w, width, out_len, out_w)
        if crop is None:
            return
        h, r = limb_features(crop)
        target_h.append(h)
        target_r.append(r)

    for f, e, w in pairs:
        add(f, e, w, pos_h, pos_r)
        for _ in range(JITTER_COPIES):
            je = Point2(*np.clip(np.add(e.as_tuple(), rng.normal(0, JITTER_SIGMA, 2)), 0, (W - 1, H - 1)))
            jw = Point2(*np.clip(np.add(w.as_tuple(), rng.normal(0, JITTER_SIGMA, 2)), 0, (W - 1, H - 1)))
            add(f, je, jw, pos_h, pos_r)
        for k in range(OFFSETS_PER_POSITIVE):
            mode = k % 3  # wrist only, elbow only, both
            ne = _offset(rng, e, W, H) if mode != 0 else e
            nw = _offset(rng, w, W, H) if mode != 1 else w
            add(f, ne, nw, neg_h, neg_r)
        if f in swap_wrists and swap_wrists[f].dist(w) > 1.0:
            add(f, e, swap_wrists[f], neg_h, neg_r)
    hog_svm = train_svm(pos_h, neg_h, C=PUPPET_C, seed=seed, feature_space="HOG")
    rgb_svm = train_svm(pos_r, neg_r, C=PUPPET_C, seed=seed + 1, feature_space="RGB")
    return PuppetArm(side, nominal, width, out_len, out_w, hog_svm, rgb_svm)


def train_puppet(annos: AnnotationSet, frames, seed: int = 0, width: float = 24.0,
                 min_pairs: int = 10, settled_only=True) -> PuppetModel:
    """Both arms; an arm with too few pairs is skipped with a warning."""
    arms = {}
    pairs = {s: lower_arm_pairs(annos, s, settled_only) for s, _, _ in ARMS}
    for k, (side, _, _) in enumerate(ARMS):
        other = "R" if side == "L" else "L"
        swap = {f: w for f, _, w in pairs[other]}
        try:
            arms[side] = train_puppet_arm(frames, pairs[side], side, swap, seed + 17 * k,
                                          width, min_pairs)
        except TrainingError as exc:
            log.warning("puppet training skipped: %s", exc)
            arms[side] = None
    return PuppetModel(arms)


def arm_scores(arm: PuppetArm, frame, elbow: Point2, wrist: Point2):
    crop = rectify(frame, elbow, wrist, arm.width, arm.out_len, arm.out_width)
    if crop is None:
        return None
    h, r = limb_features(crop)
    return arm.hog_svm.decision(h), arm.rgb_svm.decision(r)


def evaluate_lower_arm(model: PuppetModel | PuppetArm, frame, elbow: Point2, wrist: Point2,
                       side: str | None = None) -> bool:
    """True (pass) iff both SVM scores are >= 0. A missing arm model passes everything."""
    arm = model if isinstance(model, PuppetArm) else model.arm(side)
    if arm is None:
        return True
    if elbow.dist(wrist) == 0:
        return False
    s = arm_scores(arm, frame, elbow, wrist)
    return s is not None and s[0] >= 0 and s[1] >= 0


def correct_lower_arm(model, frame, elbow: Point2, wrist: Point2, n_samples: int = 25,
                      sample_radius: float = 10.0, seed: int = 0, side: str | None = None):
    """First passing Gaussian perturbation of a failed (elbow, wrist) pair, or None.

    The seeded draws are tried smallest total displacement first, so a pair
    that is nearly right moves as little as possible.
    """
    arm = model if isinstance(model, PuppetArm) else model.arm(side)
    if arm is None or n_samples <= 0:
        return None
    if evaluate_lower_arm(arm, frame, elbow, wrist):
        raise ArgumentError("correction applies only to a failed lower arm")
    frame = np.asarray(frame)
    H, W = frame.shape[:2]
    rng = np.random.default_rng(seed)
    deltas = rng.normal(0.0, sample_radius, (n_samples, 4))
    deltas = deltas[np.argsort((deltas ** 2).sum(1), kind="stable")]
    for de_x, de_y, dw_x, dw_y in deltas:
        e = Point2(min(max(elbow.x + de_x, 0.0), W - 1.0), min(max(elbow.y + de_y, 0.0), H - 1.0))
        w = Point2(min(max(wrist.x + dw_x, 0.0), W - 1.0), min(max(wrist.y + dw_y, 0.0), H - 1.0))
        if evaluate_lower_arm(arm, frame, e, w):
            return e, w
    return None
