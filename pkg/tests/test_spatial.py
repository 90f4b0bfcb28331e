import numpy as np
import pytest

from poseprop.core import Annotation, AnnotationSet, FrameStore, JointId, Origin, PipelineConfig, Point2, Provenance
from poseprop.imageproc import extract_patch, hog
from poseprop.spatial import (
    Candidate,
    build_exemplar_bank,
    candidates_from_map,
    spatial_stage,
    train_joint_forest,
    verify_and_transfer,
)

from helpers import gt_annotations, shifted

CFG = PipelineConfig(clusters_per_joint=8)


def grid(n=20):
    xs = np.arange(n, dtype=float)
    return xs, xs.copy()


def test_single_peak_gives_single_candidate():
    v = np.zeros((20, 20))
    v[6:9, 11:14] = 0.1  # shoulder around the peak
    v[7, 12] = 0.9
    xs, ys = grid()
    out = candidates_from_map(v, xs, ys, 0.5, 10, 3)
    assert out == [(Point2(12, 7), 0.9)]


def test_nms_keeps_higher_peak():
    v = np.zeros((20, 20))
    v[5, 5] = 0.8
    v[5, 10] = 0.7
    xs, ys = grid()
    out = candidates_from_map(v, xs, ys, 0.5, 10, 3)
    assert out == [(Point2(5, 5), 0.8)]


def test_below_threshold_is_empty():
    v = np.full((20, 20), 0.3)
    v[4, 4] = 0.49
    xs, ys = grid()
    assert candidates_from_map(v, xs, ys, 0.5, 10, 3) == []


@pytest.fixture(scope="module")
def bank(small_video):
    frames, gt = small_video
    annos = gt_annotations(gt, range(0, 80, 4))
    b, entries = build_exemplar_bank(annos, frames, CFG, seed=0, joints=(JointId.LWrist, JointId.Head))
    return annos, b, entries


def test_medoid_candidate_transfers_without_displacement(small_video, bank):
    frames, _ = small_video
    _, b, entries = bank
    ex = entries[JointId.LWrist][0].exemplar
    a = ex.annotation
    cand = Candidate(a.frame, JointId.LWrist, a.pos, 0.9)
    out, why = verify_and_transfer(cand, b, entries, frames, CFG)
    assert why == "accepted"
    assert out.pos == a.pos
    assert out.origin is Origin.Spatial and out.provenance.hop_count == 1
    assert out.provenance.source_frame == a.provenance.source_frame


def test_shifted_content_is_corrected(small_video, bank):
    frames, _ = small_video
    _, b, entries = bank
    ex = entries[JointId.LWrist][0].exemplar
    a = ex.annotation
    moved = FrameStore(shifted(frames[a.frame], 2, 0)[None])
    cand = Candidate(0, JointId.LWrist, a.pos, 0.9)
    out, why = verify_and_transfer(cand, b, entries, moved, CFG)
    assert why == "accepted"
    assert out.pos.x - a.pos.x == pytest.approx(2, abs=0.5)
    assert out.pos.y == pytest.approx(a.pos.y, abs=0.5)


def test_noise_candidates_rejected(bank):
    _, b, entries = bank
    rng = np.random.default_rng(0)
    noise = FrameStore((rng.uniform(0, 255, (20, 96, 96, 3))).astype(np.uint8))
    accepted = 0
    for f in range(20):
        for j in (JointId.LWrist, JointId.Head):
            out, why = verify_and_transfer(Candidate(f, j, Point2(48, 48), 0.9), b, entries, noise, CFG)
            accepted += out is not None
            assert why == "low_z"
    assert accepted == 0


def test_noise_zscores_calibrated(bank):
    _, b, _ = bank
    rng = np.random.default_rng(1)
    feats = np.stack([hog(rng.uniform(0, 1, (33, 33, 3)).astype(np.float32)).values for _ in range(200)])
    z = b.zscores(JointId.LWrist, feats).max(1)
    assert np.mean(z >= CFG.significance_min) <= 0.01


def test_spatial_stage_skips_settled_frames(small_video):
    frames, gt = small_video
    annos = gt_annotations(gt, range(0, 80, 5))
    forest = train_joint_forest(annos, frames, CFG, seed=0)
    out, st = spatial_stage(annos, frames, forest, CFG, seed=1)
    settled = {(a.frame, a.joint) for a in annos}
    assert out, "expected some transferred annotations"
    assert all((a.frame, a.joint) not in settled for a in out)
    assert len({(a.frame, a.joint) for a in out}) == len(out)
    assert st.accepted == len(out)
    # transferred annotations land near the truth on this clean scene
    err = [a.pos.dist(gt.position(a.frame, a.joint)) for a in out]
    assert np.median(err) < 5
