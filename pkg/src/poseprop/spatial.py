"""Spatial matching: forest proposals, exemplar verification, registration transfer."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .core import (
    SPATIAL_DECAY,
    Annotation,
    AnnotationSet,
    JointId,
    Origin,
    PipelineConfig,
    Point2,
    derive_rng,
    derive_seed,
)
from .errors import ArgumentError, TrainingError
from .flow import register_patches
from .imageproc import Patch, extract_patch, hog, rgb_vector
from .learners import (
    BACKGROUND,
    Exemplar,
    ExemplarBank,
    ForestParams,
    RandomForest,
    kmeans_medoid_indices,
    sample_features,
    train_exemplar_features,
    train_forest,
)

log = logging.getLogger(__name__)

BG_MIN_DIST = 10.0
BG_RING = (10.0, 30.0)
KMEANS_GRID = 11


@dataclass
class Candidate:
    frame: int
    joint: JointId
    pos: Point2
    confidence: float


# ---------------------------------------------------------------------------
# forest training (shared with personalization)

def forest_params(cfg: PipelineConfig) -> ForestParams:
    return ForestParams(trees=cfg.forest_trees, depth=cfg.forest_depth,
                        min_leaf=cfg.forest_min_leaf, threads=max(1, cfg.threads))


def _background_points(rng, joints_xy: np.ndarray, n: int, W: int, H: int) -> np.ndarray:
    out = []
    tries = 0
    while len(out) < n and tries < 50 * n:
        tries += 1
        if len(out) % 2 == 1 and len(joints_xy):
            c = joints_xy[rng.integers(len(joints_xy))]
            r, a = rng.uniform(*BG_RING), rng.uniform(0, 2 * math.pi)
            p = np.array([c[0] + r * math.cos(a), c[1] + r * math.sin(a)])
        else:
            p = np.array([rng.uniform(0, W - 1), rng.uniform(0, H - 1)])
        if not (0 <= p[0] <= W - 1 and 0 <= p[1] <= H - 1):
            continue
        if len(joints_xy) and np.min(np.hypot(*(joints_xy - p).T)) < BG_MIN_DIST:
            continue
        out.append(p)
    return np.array(out).reshape(-1, 2)


def training_set(annos: AnnotationSet, frames, cfg: PipelineConfig, seed: int,
                 settled_only=True, jitter: int = 0):
    """Feature rows and labels from annotated frames plus sampled background.

    With ``jitter`` > 0 every positive is also sampled at the 4-neighbour
    offsets of that many pixels.
    """
    rng = derive_rng(seed, 11)
    params = forest_params(cfg)
    by_frame: dict[int, list[Annotation]] = {}
    for a in annos:
        if a.active and (a.settled or not settled_only):
            by_frame.setdefault(a.frame, []).append(a)
    offs = [(0, 0)]
    if jitter > 0:
        offs += [(jitter, 0), (-jitter, 0), (0, jitter), (0, -jitter)]
    X, y = [], []
    W, H = frames.width, frames.height
    for f in sorted(by_frame):
        items = sorted(by_frame[f], key=lambda a: a.joint.value)
        every = np.array([(a.pos.x, a.pos.y) for a in annos.frame_slice(f)]).reshape(-1, 2)
        pts, labels = [], []
        for a in items:
            for dx, dy in offs:
                pts.append((min(max(a.pos.x + dx, 0), W - 1), min(max(a.pos.y + dy, 0), H - 1)))
                labels.append(a.joint.value)
        bg = _background_points(rng, every, cfg.background_per_frame, W, H)
        pts.extend(map(tuple, bg))
        labels.extend([BACKGROUND] * len(bg))
        X.append(sample_features(frames[f], pts, params))
        y.extend(labels)
    if not X:
        raise TrainingError("no annotated frames to train on")
    return np.concatenate(X), np.array(y)


def train_joint_forest(annos: AnnotationSet, frames, cfg: PipelineConfig, seed: int,
                       settled_only=True, jitter: int = 0) -> RandomForest:
    X, y = training_set(annos, frames, cfg, seed, settled_only, jitter)
    return train_forest(X, y, forest_params(cfg), derive_seed(seed, 12))


# ---------------------------------------------------------------------------
# proposals

def local_maxima(values: np.ndarray, conf_min: float):
    """(iy, ix) of 8-neighbour local maxima with value >= conf_min."""
    v = np.asarray(values, dtype=np.float64)
    p = np.pad(v, 1, constant_values=-np.inf)
    ny, nx = v.shape
    peak = v >= conf_min
    for dy in (-1, 0, 1):
        for dx in (-1, 0, 1):
            if dy or dx:
                peak &= v >= p[1 + dy:1 + dy + ny, 1 + dx:1 + dx + nx]
    return np.argwhere(peak)


def candidates_from_map(values, xs, ys, conf_min: float, nms_radius: float, max_keep: int):
    """Greedy NMS over local maxima; returns [(Point2, confidence)] by descending confidence."""
    peaks = local_maxima(values, conf_min)
    order = sorted(((float(values[iy, ix]), float(xs[ix]), float(ys[iy])) for iy, ix in peaks),
                   key=lambda t: (-t[0], t[2], t[1]))
    kept = []
    for c, x, y in order:
        if all(math.hypot(x - k[0].x, y - k[0].y) > nms_radius for k in kept):
            kept.append((Point2(x, y), c))
            if len(kept) >= max_keep:
                break
    return kept


def propose_candidates(forest: RandomForest, frames, joint: JointId, conf_min: float,
                       nms_radius: float, max_per_frame: int = 3, stride: int = 4,
                       skip: set | None = None, maps: dict | None = None) -> list[Candidate]:
    """Forest candidates for one joint over all frames not in ``skip``.

    ``maps`` is a per-frame cache of (probs, xs, ys) shared across joints;
    missing frames are computed and stored in it.
    """
    if not forest.has_joint(joint):
        return []
    col = forest.column(joint)
    skip = skip or set()
    out = []
    for f in range(len(frames)):
        if f in skip:
            continue
        if maps is not None and f in maps:
            probs, xs, ys = maps[f]
        else:
            probs, xs, ys = forest.probability_maps(frames[f], stride)
            probs = probs.astype(np.float32)
            if maps is not None:
                maps[f] = (probs, xs, ys)
        for p, c in candidates_from_map(probs[col], xs, ys, conf_min, nms_radius, max_per_frame):
            out.append(Candidate(f, joint, p, c))
    return out


# ---------------------------------------------------------------------------
# exemplar bank

@dataclass
class BankEntry:
    exemplar: Exemplar
    register_patch: Patch  # larger context patch used for registration


def _negative_points(rng, annos, joint, frames, n, min_dist):
    fs = sorted(annos.frames_with(joint, settled_only=True))
    W, H = frames.width, frames.height
    out = []
    tries = 0
    while len(out) < n and tries < 100 * n and fs:
        tries += 1
        f = fs[rng.integers(len(fs))]
        a = annos.settled(f, joint)
        p = Point2(rng.uniform(0, W - 1), rng.uniform(0, H - 1))
        if p.dist(a.pos) >= min_dist:
            out.append((f, p))
    return out


def build_exemplar_bank(annos: AnnotationSet, frames, cfg: PipelineConfig, seed: int,
                        joints=tuple(JointId)):
    """Per joint: k-means medoids of settled patches, each with its own calibrated SVM.

    Returns (ExemplarBank, {joint: [BankEntry]}) with entries aligned to bank order.
    """
    bank = ExemplarBank()
    entries: dict[JointId, list[BankEntry]] = {}
    for joint in joints:
        fs = sorted(annos.frames_with(joint, settled_only=True))
        if not fs:
            continue
        rng = derive_rng(seed, 21, joint.value)
        annos_j = [annos.settled(f, joint) for f in fs]
        patches = [extract_patch(frames[a.frame], a.pos, cfg.exemplar_side, a.frame) for a in annos_j]
        g = min(KMEANS_GRID, cfg.exemplar_side)
        feats = np.stack([rgb_vector(p, g) for p in patches])
        idx = kmeans_medoid_indices(feats, cfg.clusters_per_joint, derive_seed(seed, 22, joint.value))
        negs = _negative_points(rng, annos, joint, frames, cfg.exemplar_negatives, cfg.negative_min_dist)
        neg_feats = np.stack([hog(extract_patch(frames[f], p, cfg.exemplar_side)).values
                              for f, p in negs]) if negs else np.zeros((0, 1))
        if len(neg_feats) < 50:
            log.warning("exemplar bank skipped for %s: too few negatives", joint.name)
            continue
        lst = []
        for k, i in enumerate(idx):
            a = annos_j[i]
            svm, mu, sd = train_exemplar_features(hog(patches[i]).values, neg_feats,
                                                  derive_seed(seed, 23, joint.value, k))
            ex = Exemplar(patches[i], svm, mu, sd, a)
            bank.add(joint, ex)
            reg = extract_patch(frames[a.frame], a.pos, cfg.register_side, a.frame)
            lst.append(BankEntry(ex, reg))
        entries[joint] = lst
    return bank, entries


# ---------------------------------------------------------------------------
# verification and transfer

def verify_and_transfer(cand: Candidate, bank: ExemplarBank, entries, frames,
                        cfg: PipelineConfig, z=None):
    """Annotation transferred from the best exemplar, or None if rejected.

    ``z`` may be the candidate's precomputed z-score row. Returns
    (annotation or None, reason) with reason in {"accepted", "low_z", "residual"}.
    """
    joint = cand.joint
    if not bank.exemplars(joint):
        raise ArgumentError(f"exemplar bank is empty for {joint.name}")
    img = frames[cand.frame]
    if z is None:
        feat = hog(extract_patch(img, cand.pos, cfg.exemplar_side)).values
        z = bank.zscores(joint, feat)[0]
    best = int(np.argmax(z))
    if z[best] < cfg.significance_min:
        return None, "low_z"
    entry = entries[joint][best]
    dst = extract_patch(img, cand.pos, cfg.register_side, cand.frame)
    field = register_patches(entry.register_patch, dst, cfg.search_radius)
    if field.residual > cfg.registration_max_residual:
        return None, "residual"
    c = (cfg.register_side - 1) / 2.0
    dx, dy = field.at(c, c)
    x, y = frames.clamp(cand.pos.x + dx, cand.pos.y + dy)
    src = entry.exemplar.annotation
    anno = Annotation(cand.frame, joint, Point2(x, y), src.confidence * SPATIAL_DECAY,
                      src.provenance.step(Origin.Spatial))
    return anno, "accepted"


@dataclass
class SpatialStats:
    candidates: int = 0
    low_z: int = 0
    residual: int = 0
    accepted: int = 0


def spatial_stage(annos: AnnotationSet, frames, forest: RandomForest, cfg: PipelineConfig,
                  seed: int, maps: dict | None = None):
    """Run proposal, verification and transfer for every joint.

    Returns (list of new Spatial annotations in canonical order, SpatialStats).
    """
    bank, entries = build_exemplar_bank(annos, frames, cfg, seed)
    stats = SpatialStats()
    maps = {} if maps is None else maps
    out = []
    for joint in JointId:
        if not bank.exemplars(joint):
            continue
        skip = annos.frames_with(joint, settled_only=True)
        cands = propose_candidates(forest, frames, joint, cfg.conf_min, cfg.nms_radius,
                                   cfg.max_candidates_per_frame, cfg.detector_stride, skip, maps)
        stats.candidates += len(cands)
        if not cands:
            continue
        feats = np.stack([hog(extract_patch(frames[c.frame], c.pos, cfg.exemplar_side)).values
                          for c in cands])
        Z = bank.zscores(joint, feats)
        # a joint appears once per frame: the first accepted candidate (highest
        # forest confidence) settles the frame
        done = set()
        for c, zrow in zip(cands, Z):
            if c.frame in done:
                continue
            a, why = verify_and_transfer(c, bank, entries, frames, cfg, zrow)
            if a is None:
                setattr(stats, why, getattr(stats, why) + 1)
            else:
                stats.accepted += 1
                done.add(c.frame)
                out.append(a)
    out.sort(key=Annotation.key)
    return out, stats
