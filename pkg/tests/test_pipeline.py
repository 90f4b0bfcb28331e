import numpy as np
import pytest

from poseprop.core import Annotation, AnnotationSet, GroundTruth, JointId, Origin, PipelineConfig, Point2, Provenance
from poseprop.errors import ArgumentError, PipelineError
from poseprop.pipeline import (
    PipelineState,
    annotation_accuracy,
    evaluate_accuracy,
    personalize,
    predict_all,
    predict_frame,
    run,
    run_iteration,
    svg_chart,
    write_csv,
)
from poseprop.synth import simulate_initializer

from helpers import gt_annotations

FAST = dict(clusters_per_joint=20, forest_trees=8)


# --- metrics ---------------------------------------------------------------

def gt_of(points):
    """GroundTruth from {(frame, joint): (x, y)}."""
    n = max(f for f, _ in points) + 1
    gt = GroundTruth.empty(n)
    for (f, j), xy in points.items():
        gt.positions[f, j.value] = xy
    return gt


def test_perfect_predictions_score_100():
    pts = {(f, j): (10.0 + f, 20.0 + j.value) for f in range(4) for j in JointId}
    per, avg = evaluate_accuracy({k: Point2(*v) for k, v in pts.items()}, gt_of(pts), 20)
    assert avg == 100 and all(v == 100 for v in per.values())


def test_distance_boundary_inclusive():
    pts = {(0, JointId.Head): (50.0, 50.0)}
    gt = gt_of(pts)
    assert evaluate_accuracy({(0, JointId.Head): Point2(70, 50)}, gt, 20)[0][JointId.Head] == 100
    assert evaluate_accuracy({(0, JointId.Head): Point2(70.001, 50)}, gt, 20)[0][JointId.Head] == 0


def test_three_of_four_frames():
    pts = {(f, JointId.LWrist): (100.0, 100.0) for f in range(4)}
    preds = {(f, JointId.LWrist): Point2(100, 100) for f in range(3)}
    preds[(3, JointId.LWrist)] = Point2(150, 100)
    per, avg = evaluate_accuracy(preds, gt_of(pts), 20)
    assert per == {JointId.LWrist: 75.0} and avg == 75.0


def test_missing_prediction_is_miss_and_disjoint_is_error():
    pts = {(f, JointId.Head): (1.0, 1.0) for f in range(4)}
    assert evaluate_accuracy({(0, JointId.Head): Point2(1, 1)}, gt_of(pts))[1] == 25
    with pytest.raises(ArgumentError):
        evaluate_accuracy({(9, JointId.Head): Point2(1, 1)}, gt_of(pts))


def test_occluded_ground_truth_excluded():
    pts = {(f, JointId.Head): (1.0, 1.0) for f in range(2)}
    gt = gt_of(pts)
    gt.occluded[1, JointId.Head.value] = True
    preds = {(0, JointId.Head): Point2(1, 1), (1, JointId.Head): Point2(90, 90)}
    assert evaluate_accuracy(preds, gt)[1] == 100
    assert evaluate_accuracy(preds, gt, exclude_occluded=False)[1] == 50


def test_annotation_accuracy():
    pts = {(f, JointId.Head): (10.0, 10.0) for f in range(4)}
    s = AnnotationSet([Annotation.initial(0, JointId.Head, 10, 10),
                       Annotation.initial(1, JointId.Head, 30, 10)])
    assert annotation_accuracy(s, gt_of(pts), JointId.Head, 10) == 50
    assert annotation_accuracy(AnnotationSet(), gt_of(pts), JointId.Head, 10) is None


# --- personalized detector -------------------------------------------------

def median_error(preds, gt, frames_idx):
    e = [preds[(f, j)][0].dist(gt.position(f, j)) for f in frames_idx for j in JointId]
    return float(np.median(e))


@pytest.fixture(scope="module")
def clean_detector(small_video):
    frames, gt = small_video
    det = personalize(gt_annotations(gt, range(0, 80, 2)), frames, PipelineConfig(**FAST), seed=0)
    return det, predict_all(det, frames)


def test_clean_labels_localize_held_out(small_video, clean_detector):
    _, gt = small_video
    _, preds = clean_detector
    assert median_error(preds, gt, range(1, 80, 2)) <= 5


def test_label_noise_degrades_gracefully(small_video, clean_detector):
    frames, gt = small_video
    _, clean = clean_detector
    annos = gt_annotations(gt, range(0, 80, 2))
    rng = np.random.default_rng(0)
    corrupted = AnnotationSet()
    for a in annos:
        if rng.uniform() < 0.1:
            a = Annotation.initial(a.frame, a.joint, rng.uniform(0, frames.width - 1),
                                   rng.uniform(0, frames.height - 1))
        corrupted.add(a)
    det = personalize(corrupted, frames, PipelineConfig(**FAST), seed=0)
    noisy = predict_all(det, frames)
    held = range(1, 80, 2)
    assert median_error(noisy, gt, held) < 2 * max(median_error(clean, gt, held), 0.5)


def test_single_frame_per_joint_trains(small_video):
    frames, gt = small_video
    det = personalize(gt_annotations(gt, [7]), frames, PipelineConfig(**FAST), seed=0)
    out = predict_frame(det, frames[9])
    assert set(out) == set(JointId)


def test_training_frames_predicted_within_stride(small_video, clean_detector):
    frames, gt = small_video
    det, preds = clean_detector
    near = [max(abs(preds[(f, j)][0].x - gt.position(f, j).x),
                abs(preds[(f, j)][0].y - gt.position(f, j).y)) <= det.stride
            for f in range(0, 80, 2) for j in JointId]
    assert np.mean(near) >= 0.9


def test_uniform_frame_low_confidence(clean_detector):
    det, _ = clean_detector
    blank = np.full((256, 320, 3), 128, np.uint8)
    out = predict_frame(det, blank)
    assert all(c < 0.5 for _, c in out.values())


def test_prediction_deterministic(small_video, clean_detector):
    frames, _ = small_video
    det, _ = clean_detector
    assert predict_frame(det, frames[5]) == predict_frame(det, frames[5])


def test_personalize_needs_settled_annotations(small_video):
    frames, _ = small_video
    only_temporal = AnnotationSet([Annotation(0, JointId.Head, Point2(5, 5), 0.9,
                                              Provenance(Origin.Temporal, 3, 3))])
    with pytest.raises(PipelineError):
        personalize(only_temporal, frames, PipelineConfig(**FAST))


# --- iteration controller --------------------------------------------------

@pytest.fixture(scope="module")
def short_video(small_video):
    frames, gt = small_video
    from poseprop.core import FrameStore
    return FrameStore(frames.frames[:40]), GroundTruth(gt.positions[:40], gt.occluded[:40])


@pytest.fixture(scope="module")
def initial(short_video):
    _, gt = short_video
    return simulate_initializer(gt, 0.2, 2.0, 0.0, 0, 320, 256)


def test_iteration_grows_wrist_coverage(short_video, initial):
    frames, gt = short_video
    cfg = PipelineConfig(iterations=1, **FAST)
    state = PipelineState(initial.copy(), frames, cfg, gt)
    _, rep = run_iteration(state)
    from poseprop.core import coverage
    assert rep.coverage[JointId.LWrist] > coverage(initial, JointId.LWrist, len(frames))
    assert rep.reconciles()
    assert set(rep.seconds) == {"spatial", "temporal", "selfeval"}


def test_iteration_deterministic(short_video, initial):
    frames, gt = short_video
    cfg = PipelineConfig(iterations=1, **FAST)
    a = run_iteration(PipelineState(initial.copy(), frames, cfg, gt))
    b = run_iteration(PipelineState(initial.copy(), frames, cfg, gt))
    assert a[1].to_dict() == b[1].to_dict()
    assert a[0].annos == b[0].annos


def test_disabled_stages_only_promote(short_video):
    frames, gt = short_video
    annos = AnnotationSet()
    for f in range(5, 8):
        p = gt.position(f, JointId.Head)
        for src in (0, 1, 2):
            annos.add(Annotation(f, JointId.Head, p, 0.9, Provenance(Origin.Temporal, src, f - src)))
    annos.add(Annotation.initial(9, JointId.LWrist, 40, 40))
    cfg = PipelineConfig(spatial_enabled=False, temporal_enabled=False, selfeval_enabled=False,
                         **FAST)
    state, rep = run_iteration(PipelineState(annos.copy(), frames, cfg, gt))
    active = [a for a in state.annos if a.active]
    assert sorted((a.frame, a.origin.value) for a in active) == \
        [(5, "Consensus"), (6, "Consensus"), (7, "Consensus"), (9, "Initial")]
    assert rep.reconciles()


def test_no_seeds_is_an_error(short_video):
    frames, _ = short_video
    with pytest.raises(PipelineError):
        run_iteration(PipelineState(AnnotationSet(), frames, PipelineConfig()))


def test_zero_iterations_trains_on_initial(short_video, initial):
    frames, _ = short_video
    res = run(PipelineConfig(iterations=0, **FAST), frames, initial)
    assert res.reports == [] and res.annos == initial
    assert res.baseline.accuracy is None
    assert len(res.predictions) == len(frames) * len(JointId)


def test_without_ground_truth_reports_have_no_accuracy(short_video, initial):
    frames, _ = short_video
    res = run(PipelineConfig(iterations=1, **FAST), frames, initial)
    assert all(r.accuracy is None for r in res.reports)
    assert res.reports[0].to_dict()["accuracy"] is None


def test_report_outputs(tmp_path, short_video, initial):
    frames, gt = short_video
    state = PipelineState(initial.copy(), frames, PipelineConfig(**FAST), gt)
    _, rep = run_iteration(state)
    write_csv(tmp_path / "r.csv", [rep])
    lines = (tmp_path / "r.csv").read_text().splitlines()
    assert lines[0].startswith("iteration,joint,coverage,accuracy")
    assert len(lines) == 1 + len(JointId)
    svg = svg_chart([rep], JointId.LWrist)
    assert svg.startswith("<svg") and "stroke-dasharray" in svg and "LWrist" in svg
