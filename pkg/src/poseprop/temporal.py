"""Temporal propagation of annotations along chained adjacent-frame flow."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import TEMPORAL_DECAY, Annotation, JointId, Origin, Point2, Provenance
from .flow import BACKWARD, FORWARD, advect_many


@dataclass
class TemporalStats:
    seeds: int = 0
    emitted: int = 0
    left_frame: int = 0
    blocked: int = 0


def _sweep(seeds, flows, n_frames, window, blocked, direction, stats, out):
    step = 1 if direction == FORWARD else -1
    by_frame: dict[int, list[Annotation]] = {}
    for a in seeds:
        by_frame.setdefault(a.frame, []).append(a)
    order = range(n_frames) if step == 1 else range(n_frames - 1, -1, -1)
    # live tracks: parallel lists of seed annotation, x, y, steps taken
    seed_of: list[Annotation] = []
    xs = np.zeros(0)
    ys = np.zeros(0)
    k = np.zeros(0, np.int64)
    for t in order:
        new = by_frame.get(t, [])
        if new:
            seed_of = seed_of + new
            xs = np.concatenate([xs, [a.pos.x for a in new]])
            ys = np.concatenate([ys, [a.pos.y for a in new]])
            k = np.concatenate([k, np.zeros(len(new), np.int64)])
        nxt = t + step
        if not seed_of or not 0 <= nxt < n_frames:
            continue
        xs, ys, inside = advect_many(xs, ys, flows.get(t, direction))
        k = k + 1
        keep = inside.copy()
        stats.left_frame += int((~inside).sum())
        for i in np.flatnonzero(inside):
            if (nxt, seed_of[i].joint) in blocked:
                keep[i] = False
                stats.blocked += 1
        for i in np.flatnonzero(keep):
            s = seed_of[i]
            p = s.provenance
            out.append(Annotation(
                nxt, s.joint, Point2(float(xs[i]), float(ys[i])),
                s.confidence * TEMPORAL_DECAY ** int(k[i]),
                Provenance(Origin.Temporal, p.source_frame, p.hop_count + int(k[i])),
            ))
        stats.emitted += int(keep.sum())
        keep &= k < window
        idx = np.flatnonzero(keep)
        seed_of = [seed_of[i] for i in idx]
        xs, ys, k = xs[idx], ys[idx], k[idx]


def propagate(seeds, flows, n_frames: int, window: int = 30,
              blocked: set[tuple[int, JointId]] | None = None):
    """Temporal annotations from each Active seed up to ``window`` frames each way.

    ``flows.get(t, direction)`` must give the flow from frame t to its
    neighbour. A track ends at the video boundary, when it leaves the frame,
    or on entering a (frame, joint) slot listed in ``blocked``. Returns
    (annotations in canonical order, TemporalStats).
    """
    blocked = blocked or set()
    seeds = sorted((a for a in seeds if a.active), key=Annotation.key)
    stats = TemporalStats(seeds=len(seeds))
    out: list[Annotation] = []
    if window < 1 or not seeds:
        return out, stats
    for direction in (FORWARD, BACKWARD):
        _sweep(seeds, flows, n_frames, window, blocked, direction, stats, out)
    out.sort(key=Annotation.key)
    return out, stats
