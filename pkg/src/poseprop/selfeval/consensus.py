"""Agreement test and Parzen-mode consensus over competing annotations."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from ..core import Annotation, PipelineConfig, Point2


class Verdict(Enum):
    Consensus = "Consensus"
    DiscardAll = "DiscardAll"
    Insufficient = "Insufficient"


@dataclass
class ConsensusResult:
    verdict: Verdict
    pos: Point2 | None = None
    winner: int | None = None  # index into the candidate list
    spread: float = 0.0
    sources: int = 0


_OFFSETS = np.array([(dx, dy) for dy in range(-2, 3) for dx in range(-2, 3)], np.float64)


def parzen_density(points: np.ndarray, at: np.ndarray, sigma: float) -> np.ndarray:
    """Unnormalized Gaussian-kernel density of ``points`` evaluated at ``at`` (m, 2)."""
    d2 = ((at[:, None, :] - points[None, :, :]) ** 2).sum(-1)
    return np.exp(-d2 / (2.0 * sigma * sigma)).sum(1)


def mean_shift(points: np.ndarray, start: np.ndarray, sigma: float, iters=200, tol=1e-6):
    x = np.asarray(start, dtype=np.float64).copy()
    for _ in range(iters):
        w = np.exp(-((points - x) ** 2).sum(1) / (2.0 * sigma * sigma))
        nx = (w[:, None] * points).sum(0) / w.sum()
        if np.hypot(*(nx - x)) < tol:
            return nx
        x = nx
    return x


def mean_shift_all(points: np.ndarray, starts: np.ndarray, sigma: float, iters=200, tol=1e-6):
    """Independent mean-shift climbs from every row of ``starts``, run together."""
    x = np.array(starts, dtype=np.float64)
    live = np.ones(len(x), bool)
    for _ in range(iters):
        if not live.any():
            break
        cur = x[live]
        w = np.exp(-((cur[:, None, :] - points[None, :, :]) ** 2).sum(-1) / (2.0 * sigma * sigma))
        nx = (w @ points) / w.sum(1, keepdims=True)
        moved = np.hypot(*(nx - cur).T) >= tol
        x[live] = nx
        idx = np.flatnonzero(live)
        live[idx[~moved]] = False
    return x


def consensus(cands: list[Annotation], cfg: PipelineConfig) -> ConsensusResult:
    """Resolve the Active annotations of one (frame, joint) slot.

    Fewer than ``min_source_frames`` distinct sources leaves them untouched;
    a per-axis spread above ``agreement_std_max`` rejects them all; otherwise
    the location of maximum kernel density is returned. Every candidate seeds
    a mean-shift climb; the mode with the densest nearby lattice point wins,
    ties going to higher confidence, then fewer hops.
    """
    if not cands:
        raise ValueError("consensus needs at least one candidate")
    sources = len({a.provenance.source_frame for a in cands})
    pts = np.array([(a.pos.x, a.pos.y) for a in cands], dtype=np.float64)
    spread = float(pts.std(axis=0).max())
    if sources < cfg.min_source_frames:
        return ConsensusResult(Verdict.Insufficient, spread=spread, sources=sources)
    if spread > cfg.agreement_std_max:
        return ConsensusResult(Verdict.DiscardAll, spread=spread, sources=sources)
    sigma = cfg.parzen_sigma
    modes = mean_shift_all(pts, pts, sigma)
    # Rank modes by density on the integer lattice around them: near-equal
    # modes are then resolved at 1 px resolution rather than by float noise.
    lattice = (np.round(modes)[:, None, :] + _OFFSETS[None]).reshape(-1, 2)
    dens = parzen_density(pts, lattice, sigma)
    top = dens.max()
    hit = lattice[dens >= top - 1e-9 * max(top, 1.0)]
    tied = set()
    for g in hit:
        d2 = ((modes - g) ** 2).sum(1)
        tied.update(np.flatnonzero(d2 <= d2.min() + 1e-9).tolist())
    best = min(tied, key=lambda i: (-cands[i].confidence, cands[i].provenance.hop_count, i))
    # the annotation nearest the chosen mode lends its provenance (same tie order)
    d2 = ((pts - modes[best]) ** 2).sum(1)
    close = np.flatnonzero(d2 <= d2.min() + 1e-9)
    near = int(min(close, key=lambda i: (-cands[i].confidence, cands[i].provenance.hop_count, i)))
    x, y = modes[best]
    return ConsensusResult(Verdict.Consensus, Point2(float(x), float(y)), near, spread, sources)

