import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from poseprop.core import (
    Annotation,
    AnnotationSet,
    JointId,
    Origin,
    PipelineConfig,
    Point2,
    Provenance,
    Status,
)
from poseprop.errors import ArgumentError
from poseprop.selfeval import (
    Evaluators,
    Verdict,
    apply_self_evaluation,
    consensus,
    correct_lower_arm,
    detect_occlusion,
    evaluate_lower_arm,
    limb_rectangle,
    parzen_density,
    rectify,
    train_occlusion,
    train_puppet,
)
from poseprop.synth import OcclusionEvent, default_scene, generate_video

from helpers import PLAIN, gt_annotations

CFG = PipelineConfig()


def tmp(frame, joint, x, y, source, hops=None, conf=0.9):
    hops = hops or max(1, abs(frame - source))
    return Annotation(frame, joint, Point2(x, y), conf, Provenance(Origin.Temporal, source, hops))


# --- consensus -------------------------------------------------------------

def test_identical_positions_promote():
    res = consensus([tmp(5, JointId.Head, 40, 60, s) for s in (1, 2, 3)], CFG)
    assert res.verdict is Verdict.Consensus and res.pos == Point2(40, 60)


def test_wide_spread_discards():
    # per-axis std 25 px
    xs = np.array([-1.0, 0.0, 1.0]) * 25 * math.sqrt(1.5)
    cands = [tmp(5, JointId.Head, 100 + x, 60, s) for x, s in zip(xs, (1, 2, 3))]
    assert np.std(xs) == pytest.approx(25)
    assert consensus(cands, CFG).verdict is Verdict.DiscardAll


def test_spread_threshold_is_exact():
    for std, verdict in ((19.99, Verdict.Consensus), (20.0, Verdict.Consensus),
                         (20.01, Verdict.DiscardAll)):
        xs = np.array([-1.0, 0.0, 1.0]) * std * math.sqrt(1.5)
        cands = [tmp(5, JointId.Head, 100 + x, 60, s) for x, s in zip(xs, (1, 2, 3))]
        assert consensus(cands, CFG).verdict is verdict


def test_source_threshold_is_exact():
    two = [tmp(5, JointId.Head, 40, 60, s) for s in (1, 1, 2, 2)]
    assert consensus(two, CFG).verdict is Verdict.Insufficient
    three = two + [tmp(5, JointId.Head, 40, 60, 3)]
    assert consensus(three, CFG).verdict is Verdict.Consensus


def brute_force_mode(pts, sigma):
    lo = np.floor(pts.min(0)) - 1
    hi = np.ceil(pts.max(0)) + 1
    gx, gy = np.meshgrid(np.arange(lo[0], hi[0] + 1), np.arange(lo[1], hi[1] + 1))
    at = np.stack([gx.ravel(), gy.ravel()], 1)
    return at[int(np.argmax(parzen_density(pts, at, sigma)))]


def test_four_near_candidates_match_grid_mode():
    pts = np.array([[50, 50], [52, 51], [49, 53], [51, 49.5]])
    cands = [tmp(9, JointId.LWrist, x, y, s) for (x, y), s in zip(pts, (1, 2, 3, 4))]
    res = consensus(cands, CFG)
    g = brute_force_mode(pts, CFG.parzen_sigma)
    assert np.hypot(res.pos.x - g[0], res.pos.y - g[1]) <= 1


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(st.floats(0, 30), st.floats(0, 30)), min_size=3, max_size=8),
       st.integers(0, 10_000))
def test_consensus_matches_grid_oracle(pts, seed):
    pts = np.array(pts)
    cands = [tmp(9, JointId.LWrist, x, y, 100 + i) for i, (x, y) in enumerate(pts)]
    res = consensus(cands, CFG)
    if res.verdict is not Verdict.Consensus:
        assert pts.std(0).max() > CFG.agreement_std_max
        return
    g = brute_force_mode(pts, CFG.parzen_sigma)
    dens = parzen_density(pts, np.array([[res.pos.x, res.pos.y], g], float), CFG.parzen_sigma)
    # within 1 px of the grid mode, or an equally dense mode elsewhere
    assert np.hypot(res.pos.x - g[0], res.pos.y - g[1]) <= 1 or dens[0] >= dens[1] - 1e-9


def test_consensus_tie_breaks_by_confidence():
    cands = [tmp(9, JointId.Head, 0, 0, 1, conf=0.5), tmp(9, JointId.Head, 0, 0, 2, conf=0.8),
             tmp(9, JointId.Head, 0, 0, 3, conf=0.7)]
    assert consensus(cands, CFG).winner == 1


# --- puppet geometry -------------------------------------------------------

def test_limb_rectangle_axis_aligned():
    r = limb_rectangle(Point2(0, 0), Point2(40, 0), 16)
    assert np.allclose(r, [(0, -8), (40, -8), (40, 8), (0, 8)])


def limb_image(h=80, w=80):
    rng = np.random.default_rng(0)
    img = np.zeros((h, w, 3), np.float32)
    img[30:50, 10:60] = rng.uniform(0, 1, (20, 50, 3))
    return img


def test_rectify_rotation_equivariant():
    img = limb_image()
    a = rectify(img, Point2(15, 40), Point2(55, 40), 16, 41, 17)
    # np.rot90 maps pixel (x, y) to (y, w-1-x)
    rot = np.rot90(img).copy()
    b = rectify(rot, Point2(40, 79 - 15), Point2(40, 79 - 55), 16, 41, 17)
    assert np.allclose(a, b, atol=1e-5)


def test_rectify_foreshortened_is_stretched():
    ramp = np.tile(np.arange(100, dtype=np.float32)[None, :, None] / 100, (40, 1, 3))
    full = rectify(ramp, Point2(10, 20), Point2(50, 20), 8, 41, 9)
    half = rectify(ramp, Point2(10, 20), Point2(30, 20), 8, 41, 9)
    # half-length limb: each crop row advances half as far along the image
    assert np.allclose(np.diff(full[:, 4, 0]), 0.01, atol=1e-6)
    assert np.allclose(np.diff(half[:, 4, 0]), 0.005, atol=1e-6)


# --- trained evaluators on the synthetic figure ---------------------------

@pytest.fixture(scope="module")
def models(small_video):
    frames, gt = small_video
    train = range(0, 80, 2)
    annos = gt_annotations(gt, train)
    return train_puppet(annos, frames, seed=0), annos


def test_puppet_passes_true_limbs_and_fails_swaps(small_video, models):
    frames, gt = small_video
    puppet, _ = models
    held = range(1, 80, 2)
    passes = fails = 0
    for f in held:
        for side, e, w, other in (("L", JointId.LElbow, JointId.LWrist, JointId.RWrist),
                                  ("R", JointId.RElbow, JointId.RWrist, JointId.LWrist)):
            ep = gt.position(f, e)
            passes += evaluate_lower_arm(puppet, frames[f], ep, gt.position(f, w), side)
            fails += not evaluate_lower_arm(puppet, frames[f], ep, gt.position(f, other), side)
    assert passes / 80 >= 0.95
    assert fails / 80 >= 0.90


def test_puppet_degenerate_limb_fails(small_video, models):
    frames, _ = small_video
    puppet, _ = models
    assert not evaluate_lower_arm(puppet, frames[0], Point2(50, 50), Point2(50, 50), "L")


def test_correction_precondition_and_zero_samples(small_video, models):
    frames, gt = small_video
    puppet, _ = models
    e, w = gt.position(1, JointId.LElbow), gt.position(1, JointId.LWrist)
    with pytest.raises(ArgumentError):
        correct_lower_arm(puppet, frames[1], e, w, 25, 10, 0, "L")
    bad_w = Point2(w.x + 30, w.y - 30)
    assert correct_lower_arm(puppet, frames[1], e, bad_w, 0, 10, 0, "L") is None


def test_correction_recovers_nearby_truth(small_video, models):
    frames, gt = small_video
    puppet, _ = models
    ok = trials = 0
    rng = np.random.default_rng(5)
    for f in range(1, 80, 4):
        e, w = gt.position(f, JointId.LElbow), gt.position(f, JointId.LWrist)
        a = rng.uniform(0, 2 * np.pi)
        bw = Point2(w.x + 8 * math.cos(a), w.y + 8 * math.sin(a))
        if evaluate_lower_arm(puppet, frames[f], e, bw, "L"):
            continue
        for s in range(3):
            trials += 1
            fix = correct_lower_arm(puppet, frames[f], e, bw, 25, 10, s, "L")
            if fix is None:
                continue
            assert evaluate_lower_arm(puppet, frames[f], *fix, "L")
            ok += fix[0].dist(e) <= 15 and fix[1].dist(w) <= 15
    assert trials > 0 and ok / trials >= 0.5


@pytest.fixture(scope="module")
def occluded_video():
    ev = [OcclusionEvent(s, s + 7, joints=(j,), size=(36.0, 36.0))
          for s, j in ((10, "Head"), (30, "LShoulder"), (50, "RElbow"), (70, "RShoulder"),
                       (90, "LElbow"), (110, "Head"))]
    return generate_video(default_scene(n_frames=120, occlusions=ev, **PLAIN), seed=1)


def test_occlusion_detector_recall_and_fpr(occluded_video):
    frames, gt = occluded_video
    train = [f for f in range(0, 120, 3)]
    annos = gt_annotations(gt, train)
    det = train_occlusion(annos, frames, seed=0)
    tp = fn = fp = tn = 0
    for f in range(120):
        if f in train:
            continue
        for j in (JointId.Head, JointId.LShoulder, JointId.RShoulder, JointId.LElbow, JointId.RElbow):
            occ = detect_occlusion(det, frames[f], j, gt.position(f, j))
            if gt.is_occluded(f, j):
                tp += occ
                fn += not occ
            else:
                fp += occ
                tn += not occ
    assert tp + fn > 0
    assert tp / (tp + fn) >= 0.9
    assert fp / (fp + tn) <= 0.1


def test_occlusion_training_positives_visible(occluded_video):
    frames, gt = occluded_video
    train = list(range(0, 120, 3))
    annos = gt_annotations(gt, train)
    det = train_occlusion(annos, frames, seed=0)
    vis = tot = 0
    for a in annos:
        if det.get(a.joint) is None:
            continue
        tot += 1
        vis += not detect_occlusion(det, frames[a.frame], a.joint, a.pos)
    assert vis / tot >= 0.95


def test_occlusion_constant_window_is_occluded(occluded_video):
    frames, gt = occluded_video
    det = train_occlusion(gt_annotations(gt, range(0, 120, 3)), frames, seed=0)
    blank = np.full_like(frames[0], 128)
    for j in (JointId.Head, JointId.LShoulder, JointId.RElbow):
        assert detect_occlusion(det, blank, j, Point2(5, 5))


# --- the full pass ---------------------------------------------------------

def agreeing_set(gt, frames_idx, joints, sources=(1000, 1001, 1002)):
    s = AnnotationSet()
    for f in frames_idx:
        for j in joints:
            p = gt.position(f, j)
            for src in sources:
                s.add(tmp(f, j, p.x, p.y, src, hops=1))
    return s


def test_agreeing_sources_only_promote(small_video, models):
    frames, gt = small_video
    puppet, _ = models
    annos = agreeing_set(gt, range(1, 80, 8), list(JointId))
    out, st_ = apply_self_evaluation(annos, Evaluators(puppet, None), frames, CFG)
    assert st_.n_discarded == st_.discarded["Merged"] == len(annos)
    assert st_.promoted == len(annos) // 3 and st_.corrected == 0
    active = [a for a in out if a.active]
    assert all(a.origin is Origin.Consensus for a in active)
    assert len(active) == len(annos) // 3


def test_planted_drift_is_discarded(small_video, models):
    frames, gt = small_video
    puppet, _ = models
    f = 41
    e = gt.position(f, JointId.LElbow)
    annos = AnnotationSet()
    annos.add(Annotation.initial(f, JointId.LElbow, e.x, e.y))
    # two drifting tracks (plus a third source) agree on background content
    for src in (20, 60, 30):
        annos.add(tmp(f, JointId.LWrist, 300, 30, src))
    cfg = PipelineConfig(correction_samples=0)
    out, st_ = apply_self_evaluation(annos, Evaluators(puppet, None), frames, cfg)
    assert st_.discarded["PuppetFail"] == 2
    assert not out.at(f, JointId.LWrist) and not out.at(f, JointId.LElbow)


def test_occluded_span_has_no_active(occluded_video):
    frames, gt = occluded_video
    det = train_occlusion(gt_annotations(gt, range(0, 120, 3)), frames, seed=0)
    annos = agreeing_set(gt, range(8, 20), [JointId.Head])
    out, _ = apply_self_evaluation(annos, Evaluators(None, det), frames, CFG)
    for f in range(10, 18):
        assert not out.at(f, JointId.Head)
        assert any(a.status is Status.Occluded for a in out.at(f, JointId.Head, active_only=False))


def test_self_evaluation_deterministic_and_monotone(small_video, models):
    frames, gt = small_video
    puppet, _ = models
    rng = np.random.default_rng(0)
    annos = AnnotationSet()
    for f in range(3, 80, 5):
        for j in JointId:
            p = gt.position(f, j)
            for src in rng.choice(200, size=rng.integers(1, 5), replace=False):
                annos.add(tmp(f, j, p.x + rng.normal(0, 6), p.y + rng.normal(0, 6), int(src)))
    a, sa = apply_self_evaluation(annos, Evaluators(puppet, None), frames, CFG, seed=3)
    b, sb = apply_self_evaluation(annos, Evaluators(puppet, None), frames, CFG, seed=3)
    assert a == b and sa == sb
    for f, j in annos.keys():
        before = len([x for x in annos.at(f, j) if not x.settled])
        after = len([x for x in a.at(f, j) if not x.settled])
        assert after <= max(before, 0) and (after <= 1 or after == before)
