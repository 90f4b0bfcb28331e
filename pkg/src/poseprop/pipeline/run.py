"""Iteration controller: spatial matching, temporal propagation, self-evaluation."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

from ..core import Annotation, AnnotationSet, JointId, Origin, PipelineConfig, Status, derive_seed
from ..errors import PipelineError
from ..flow import FlowProvider
from ..selfeval import Evaluators, apply_self_evaluation, occluded_slots, train_evaluators
from ..spatial import spatial_stage, train_joint_forest
from ..temporal import propagate
from .metrics import annotation_accuracy, coverage_by_joint
from .personalize import PersonalizedDetector, personalize, predict_all
from .report import IterationReport, JointCounts

log = logging.getLogger(__name__)


@dataclass
class PipelineState:
    annos: AnnotationSet
    frames: object
    cfg: PipelineConfig
    gt: object = None
    flows: object = None
    iteration: int = 0
    audit: list = field(default_factory=list)
    # annotations created since the last temporal pass that should seed the next one
    pending_seeds: list = field(default_factory=list)

    def __post_init__(self):
        if self.flows is None:
            self.flows = FlowProvider(self.frames, threads=max(1, self.cfg.threads))
        if self.iteration == 0 and not self.pending_seeds:
            self.pending_seeds = [a for a in self.annos if a.active and a.origin is Origin.Initial]


@dataclass
class RunResult:
    annos: AnnotationSet
    detector: PersonalizedDetector
    reports: list
    predictions: dict
    baseline: IterationReport
    audit: list


def snapshot(annos: AnnotationSet, frames, cfg: PipelineConfig, gt, iteration: int) -> IterationReport:
    n = len(frames)
    acc = None
    if gt is not None:
        acc = {j: annotation_accuracy(annos, gt, j, cfg.accuracy_d, cfg.exclude_occluded_gt)
               for j in JointId}
    return IterationReport(iteration, coverage_by_joint(annos, n), acc,
                           active_before=annos.n_active(), active_after=annos.n_active())


def _add_unsettled(annos: AnnotationSet, new: list[Annotation]) -> list[Annotation]:
    """Insert annotations whose slot holds no settled annotation; returns those kept."""
    kept = []
    for a in new:
        if annos.settled_id(a.frame, a.joint) is None:
            annos.add(a)
            kept.append(a)
    return kept


def _joint_counts(after: AnnotationSet, n_before: int, was_active: list):
    counts = {j: JointCounts() for j in JointId}
    for i, a in enumerate(after):
        c = counts[a.joint]
        start_active = was_active[i] if i < n_before else True
        if i >= n_before:
            c.added += 1
            if a.origin is Origin.Corrected:
                c.corrected += 1
        if start_active and a.status is Status.Discarded:
            c.discarded += 1
        elif start_active and a.status is Status.Occluded:
            c.occluded += 1
    return counts


def run_iteration(state: PipelineState) -> tuple[PipelineState, IterationReport]:
    cfg, frames = state.cfg, state.frames
    annos = state.annos.copy()
    if annos.n_active() == 0:
        raise PipelineError("no seeds: the annotation set holds no Active annotation")
    k = state.iteration + 1
    seed = derive_seed(cfg.rng_seed, 100, k)
    n_before = len(annos)
    was_active = [a.active for a in annos]
    active_before = annos.n_active()
    secs, stages = {}, {}

    seeds = list(state.pending_seeds)
    t0 = time.perf_counter()
    if cfg.spatial_enabled:
        forest = train_joint_forest(annos, frames, cfg, derive_seed(seed, 1))
        new, st = spatial_stage(annos, frames, forest, cfg, derive_seed(seed, 2))
        kept = _add_unsettled(annos, new)
        seeds.extend(kept)
        stages["spatial"] = {"candidates": st.candidates, "low_z": st.low_z,
                             "residual": st.residual, "added": len(kept)}
    secs["spatial"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    if cfg.temporal_enabled:
        blocked = occluded_slots(annos)
        emitted, st = propagate(seeds, state.flows, len(frames), cfg.temporal_window, blocked)
        kept = _add_unsettled(annos, emitted)
        stages["temporal"] = {"seeds": st.seeds, "emitted": st.emitted, "blocked": st.blocked,
                              "left_frame": st.left_frame, "added": len(kept)}
    secs["temporal"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    audit = []
    if cfg.selfeval_enabled:
        models = train_evaluators(annos, frames, cfg, derive_seed(seed, 3))
    else:
        models = Evaluators()
    out, st = apply_self_evaluation(annos, models, frames, cfg, derive_seed(seed, 4), audit)
    for row in audit:
        row["iteration"] = k
    stages["selfeval"] = {"promoted": st.promoted, "corrected": st.corrected,
                          "occluded": st.occluded, "retained": st.retained,
                          "discarded": dict(sorted(st.discarded.items()))}
    secs["selfeval"] = time.perf_counter() - t0

    rep = snapshot(out, frames, cfg, state.gt, k)
    rep.joint_counts = _joint_counts(out, n_before, was_active)
    rep.stage_counts = stages
    rep.seconds = secs
    rep.active_before = active_before
    rep.active_after = out.n_active()
    # corrections made by this pass seed the next temporal stage
    next_seeds = [out[i] for i in range(len(annos), len(out))
                  if out[i].active and out[i].origin is Origin.Corrected]
    new_state = PipelineState(out, frames, cfg, state.gt, state.flows, k,
                              state.audit + audit, next_seeds)
    return new_state, rep


def run(cfg: PipelineConfig, frames, initial: AnnotationSet, gt=None, flows=None) -> RunResult:
    """``cfg.iterations`` passes, then the personalized detector and its predictions."""
    if initial.n_active() == 0:
        raise PipelineError("no seeds: the initial annotation set is empty")
    state = PipelineState(initial.copy(), frames, cfg, gt, flows)
    baseline = snapshot(state.annos, frames, cfg, gt, 0)
    reports = []
    for _ in range(cfg.iterations):
        state, rep = run_iteration(state)
        log.info("iteration %d: active %d -> %d", rep.iteration, rep.active_before, rep.active_after)
        reports.append(rep)
    det = personalize(state.annos, frames, cfg, derive_seed(cfg.rng_seed, 200))
    preds = predict_all(det, frames)
    return RunResult(state.annos, det, reports, preds, baseline, state.audit)
