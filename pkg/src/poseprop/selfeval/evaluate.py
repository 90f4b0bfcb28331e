"""One self-evaluation pass: consensus, lower-arm checks, occlusion marking, correction."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

from ..core import ARMS, Annotation, AnnotationSet, JointId, Origin, PipelineConfig, Provenance, Status
from ..core.config import derive_seed
from .consensus import Verdict, consensus
from .occlusion import OCCLUSION_JOINTS, OcclusionDetector, detect_occlusion, train_occlusion
from .puppet import PuppetModel, correct_lower_arm, evaluate_lower_arm, train_puppet

LOW_AGREEMENT = "LowAgreement"
PUPPET_FAIL = "PuppetFail"
OCCLUDED = "Occluded"
INSUFFICIENT = "InsufficientSources"
CORRECTED = "Corrected"


@dataclass
class Evaluators:
    puppet: PuppetModel | None = None
    occlusion: OcclusionDetector | None = None


@dataclass
class EvalStats:
    promoted: int = 0
    discarded: Counter = field(default_factory=Counter)  # reason -> count
    occluded: int = 0
    corrected: int = 0
    retained: int = 0
    added: int = 0

    @property
    def n_discarded(self) -> int:
        return sum(self.discarded.values())


def train_evaluators(annos: AnnotationSet, frames, cfg: PipelineConfig, seed: int) -> Evaluators:
    return Evaluators(
        train_puppet(annos, frames, derive_seed(seed, 1), cfg.limb_width, cfg.min_puppet_pairs),
        train_occlusion(annos, frames, derive_seed(seed, 2), cfg.occlusion_window),
    )


def _entry(a: Annotation, reason: str, **extra):
    d = {"frame": a.frame, "joint": a.joint.name, "x": round(a.pos.x, 4), "y": round(a.pos.y, 4),
         "origin": a.origin.value, "source_frame": a.provenance.source_frame, "reason": reason}
    d.update(extra)
    return d


def _slots(annos: AnnotationSet):
    return sorted({k for k in annos.keys() if annos.slot(*k)}, key=lambda k: (k[0], k[1].value))


def _promote(out: AnnotationSet, frame, joint, cfg, stats, audit):
    ids = out.slot(frame, joint)
    cands = [out[i] for i in ids]
    res = consensus(cands, cfg)
    if res.verdict is Verdict.Insufficient:
        stats.retained += len(ids)
        audit.append({"frame": frame, "joint": joint.name, "reason": INSUFFICIENT,
                      "action": "retained", "count": len(ids), "sources": res.sources})
        return
    for i in ids:
        out.discard(i)
    if res.verdict is Verdict.DiscardAll:
        stats.discarded[LOW_AGREEMENT] += len(ids)
        for i in ids:
            audit.append(_entry(out[i], LOW_AGREEMENT, spread=round(res.spread, 4)))
        return
    w = cands[res.winner]
    conf = max(c.confidence for c in cands)
    prov = Provenance(Origin.Consensus, w.provenance.source_frame, max(w.provenance.hop_count, 1))
    out.add(Annotation(frame, joint, res.pos, conf, prov))
    stats.promoted += 1
    stats.added += 1
    # the candidates folded into the consensus count as discarded (reason-less)
    stats.discarded["Merged"] += len(ids)


def _check_arms(out: AnnotationSet, frames, puppet: PuppetModel, cfg, seed, stats, audit,
                frame_ids):
    for f in frame_ids:
        for k, (side, ej, wj) in enumerate(ARMS):
            if puppet.arm(side) is None:
                continue
            ei, wi = out.representative_id(f, ej), out.representative_id(f, wj)
            if ei is None or wi is None:
                continue
            e, w = out[ei], out[wi]
            img = frames[f]
            if evaluate_lower_arm(puppet, img, e.pos, w.pos, side):
                continue
            for i in (ei, wi):
                out.discard(i)
                audit.append(_entry(out[i], PUPPET_FAIL, side=side))
            stats.discarded[PUPPET_FAIL] += 2
            fix = correct_lower_arm(puppet, img, e.pos, w.pos, cfg.correction_samples,
                                    cfg.correction_radius, derive_seed(seed, f, k), side)
            if fix is None:
                continue
            for a, p in ((e, fix[0]), (w, fix[1])):
                prov = Provenance(Origin.Corrected, a.provenance.source_frame, a.provenance.hop_count + 1)
                na = Annotation(f, a.joint, p, a.confidence, prov)
                out.add(na)
                audit.append(_entry(na, CORRECTED, from_x=round(a.pos.x, 4), from_y=round(a.pos.y, 4)))
            stats.corrected += 2
            stats.added += 2


def _check_occlusion(out: AnnotationSet, frames, det: OcclusionDetector, stats, audit, frame_ids):
    for f in frame_ids:
        for joint in OCCLUSION_JOINTS:
            if det.get(joint) is None:
                continue
            rep = out.settled(f, joint)
            if rep is None:
                continue
            if not detect_occlusion(det, frames[f], joint, rep.pos):
                continue
            for i in out.slot(f, joint):
                out.occlude(i)
                audit.append(_entry(out[i], OCCLUDED))
                stats.occluded += 1


def apply_self_evaluation(annos: AnnotationSet, models: Evaluators, frames, cfg: PipelineConfig,
                          seed: int = 0, audit: list | None = None):
    """Returns (new set, EvalStats); ``audit`` collects one dict per decision.

    Settled slots (initial, consensus, corrected) skip the vote but still face
    the lower-arm and occlusion checks.
    """
    out = annos.copy()
    audit = [] if audit is None else audit
    stats = EvalStats()
    for frame, joint in _slots(out):
        if out.settled_id(frame, joint) is None:
            _promote(out, frame, joint, cfg, stats, audit)
    frame_ids = sorted({f for f, _ in out.keys()})
    if models.puppet is not None:
        _check_arms(out, frames, models.puppet, cfg, seed, stats, audit, frame_ids)
    if models.occlusion is not None:
        _check_occlusion(out, frames, models.occlusion, stats, audit, frame_ids)
    return out, stats


def occluded_slots(annos: AnnotationSet) -> set[tuple[int, JointId]]:
    """(frame, joint) slots flagged occluded and holding nothing Active."""
    out = set()
    for f, j in annos.keys():
        ids = annos.slot(f, j, active_only=False)
        if any(annos[i].status is Status.Occluded for i in ids) and not annos.slot(f, j):
            out.add((f, j))
    return out
