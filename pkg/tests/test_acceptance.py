"""Acceptance suite: one test per criterion, each recording a PASS/FAIL line
that conftest prints in the terminal summary."""

import math
import time

import cv2
import numpy as np
import pytest

from poseprop.cli import main
from poseprop.core import JointId, PipelineConfig, Point2
from poseprop.flow import compute_flow
from poseprop.imageproc import Patch, rgb_vector
from poseprop.learners import BACKGROUND, ForestParams, kmeans_medoid_indices, train_forest, train_svm
from poseprop.pipeline import evaluate_accuracy, personalize, predict_all, predictions_as_points, run
from poseprop.selfeval import (
    Verdict,
    consensus,
    detect_occlusion,
    evaluate_lower_arm,
    train_occlusion,
    train_puppet,
)
from poseprop.synth import OcclusionEvent, default_scene, generate_video, simulate_initializer

from helpers import criterion, gt_annotations, shifted, texture
from test_learners import brute_force_max_margin, brute_force_two_clusters, separable_instance
from test_selfeval import brute_force_mode, tmp

WRISTS = (JointId.LWrist, JointId.RWrist)
SHOULDERS = (JointId.LShoulder, JointId.RShoulder)
SEEDS = (0, 1, 2)


# --- 1: flow ---------------------------------------------------------------

def _forward_backward_error(f, g):
    h, w = f.shape[:2]
    ys, xs = np.mgrid[0:h, 0:w].astype(np.float32)
    gb = cv2.remap(g, xs + f[..., 0], ys + f[..., 1], cv2.INTER_LINEAR)
    return np.hypot(*(f + gb).transpose(2, 0, 1))


def test_criterion_1_flow_oracles():
    with criterion(1, "flow oracle suite") as c:
        t0 = time.perf_counter()
        inner = (slice(16, -16), slice(16, -16))
        a = texture(256, 320, seed=100)
        zero = float(np.abs(compute_flow(a, a).uv).max())
        worst_med, worst_fb = 0.0, 1.0
        for k, (dx, dy) in enumerate((dx, dy) for dx in range(-8, 9) for dy in range(-8, 9)):
            a = texture(256, 320, seed=200 + k)
            b = shifted(a, dx, dy)
            f = compute_flow(a, b).uv
            g = compute_flow(b, a).uv
            med = np.median(f[inner].reshape(-1, 2), axis=0)
            worst_med = max(worst_med, abs(med[0] - dx), abs(med[1] - dy))
            worst_fb = min(worst_fb, float((_forward_backward_error(f, g)[inner] <= 0.5).mean()))
        secs = time.perf_counter() - t0
        c.detail = (f"zero-motion max {zero:.3f} px, worst median error {worst_med:.3f} px, "
                    f"worst FB-consistent fraction {worst_fb:.3f}, {secs:.1f} s")
        assert zero <= 0.1
        assert worst_med <= 0.5
        assert worst_fb >= 0.95
        assert secs < 30


# --- 2: consensus ----------------------------------------------------------

def test_criterion_2_consensus_oracle():
    with criterion(2, "consensus equals grid Parzen argmax; 20 px / 3-source rule") as c:
        t0 = time.perf_counter()
        cfg = PipelineConfig()
        rng = np.random.default_rng(2024)
        worst = 0.0
        for _ in range(100):
            n = int(rng.integers(3, 9))
            pts = rng.uniform(0, 30, (n, 2))
            cands = [tmp(9, JointId.LWrist, x, y, 100 + i) for i, (x, y) in enumerate(pts)]
            res = consensus(cands, cfg)
            assert res.verdict is Verdict.Consensus
            g = brute_force_mode(pts, cfg.parzen_sigma)
            worst = max(worst, math.hypot(res.pos.x - g[0], res.pos.y - g[1]))
        # the spread threshold is inclusive at exactly 20 px, the source threshold at 3
        for std, want in ((20.0, Verdict.Consensus), (20.01, Verdict.DiscardAll)):
            xs = np.array([-1.0, 0.0, 1.0]) * std * math.sqrt(1.5)
            got = consensus([tmp(5, JointId.Head, 100 + x, 60, s) for x, s in zip(xs, (1, 2, 3))], cfg)
            assert got.verdict is want
        two = [tmp(5, JointId.Head, 40, 60, s) for s in (1, 1, 2, 2)]
        assert consensus(two, cfg).verdict is Verdict.Insufficient
        assert consensus(two + [tmp(5, JointId.Head, 40, 60, 3)], cfg).verdict is Verdict.Consensus
        secs = time.perf_counter() - t0
        c.detail = f"worst distance to grid mode {worst:.2f} px, {secs:.1f} s"
        assert worst <= 1.0
        assert secs < 10


# --- 3: puppet and occlusion -----------------------------------------------

def test_criterion_3_puppet_and_occlusion():
    with criterion(3, "puppet pass/swap rates and occlusion recall/FPR") as c:
        t0 = time.perf_counter()
        frames, gt = generate_video(default_scene(n_frames=80), seed=7)
        puppet = train_puppet(gt_annotations(gt, range(0, 80, 2)), frames, seed=0)
        passes = fails = total = 0
        for f in range(1, 80, 2):
            for side, e, w, other in (("L", JointId.LElbow, JointId.LWrist, JointId.RWrist),
                                      ("R", JointId.RElbow, JointId.RWrist, JointId.LWrist)):
                ep = gt.position(f, e)
                passes += evaluate_lower_arm(puppet, frames[f], ep, gt.position(f, w), side)
                fails += not evaluate_lower_arm(puppet, frames[f], ep, gt.position(f, other), side)
                total += 1

        ev = [OcclusionEvent(s, s + 7, joints=(j,), size=(36.0, 36.0))
              for s, j in ((10, "Head"), (30, "LShoulder"), (50, "RElbow"), (70, "RShoulder"),
                           (90, "LElbow"), (110, "Head"))]
        oframes, ogt = generate_video(default_scene(n_frames=120, occlusions=ev), seed=1)
        train = set(range(0, 120, 3))
        det = train_occlusion(gt_annotations(ogt, sorted(train)), oframes, seed=0)
        tp = fn = fp = tn = 0
        for f in sorted(set(range(120)) - train):
            for j in (JointId.Head, JointId.LShoulder, JointId.RShoulder, JointId.LElbow,
                      JointId.RElbow):
                occ = detect_occlusion(det, oframes[f], j, ogt.position(f, j))
                if ogt.is_occluded(f, j):
                    tp, fn = tp + occ, fn + (not occ)
                else:
                    fp, tn = fp + occ, tn + (not occ)
        secs = time.perf_counter() - t0
        recall, fpr = tp / max(tp + fn, 1), fp / max(fp + tn, 1)
        c.detail = (f"pass {passes / total:.3f}, swap-fail {fails / total:.3f}, "
                    f"occlusion recall {recall:.3f} at FPR {fpr:.3f}, {secs:.1f} s")
        assert passes / total >= 0.95
        assert fails / total >= 0.90
        assert tp + fn > 0 and recall >= 0.9 and fpr <= 0.1
        assert secs < 120


# --- 4 and 5: the default 500-frame scene -----------------------------------

class Runs:
    """Full pipeline runs on the default scene, computed once per seed."""

    def __init__(self):
        self.cache = {}

    def get(self, seed):
        if seed not in self.cache:
            frames, gt = generate_video(default_scene(), seed=seed)
            init = simulate_initializer(gt, 0.05, 2.0, 0.02, seed, frames.width, frames.height)
            cfg = PipelineConfig(iterations=3, accuracy_d=10.0, rng_seed=seed, threads=1)
            t0 = time.perf_counter()
            res = run(cfg, frames, init, gt)
            self.cache[seed] = (frames, gt, init, cfg, res, time.perf_counter() - t0)
        return self.cache[seed]


@pytest.fixture(scope="module")
def runs():
    return Runs()


def _mean(d, joints):
    return sum(d[j] for j in joints) / len(joints)


def test_criterion_4_coverage_trend(runs):
    with criterion(4, "wrist coverage/accuracy trend on the default scene") as c:
        _, _, _, _, res, secs = runs.get(0)
        rows = [res.baseline] + res.reports
        cov = [100 * _mean(r.coverage, WRISTS) for r in rows]
        acc = [_mean(r.accuracy, WRISTS) for r in res.reports]
        final = res.reports[-1]
        shoulders = [100 * final.coverage[j] for j in SHOULDERS]
        low = [100 * final.coverage[j] for j in WRISTS]
        c.detail = (f"wrist coverage {' -> '.join(f'{v:.1f}' for v in cov)}, "
                    f"wrist acc@10 {' -> '.join(f'{v:.1f}' for v in acc)}, "
                    f"shoulders {min(shoulders):.1f}, {secs:.0f} s")
        assert all(b >= a for a, b in zip(cov, cov[1:]))
        assert all(b >= a for a, b in zip(acc, acc[1:]))
        assert min(low) >= 70 and cov[-1] - cov[0] >= 40
        assert min(shoulders) >= 95
        assert secs < 600


def test_criterion_5_personalization_gain(runs):
    with criterion(5, "final-annotation detector beats initial-only detector by >= 10 points") as c:
        gains = []
        for seed in SEEDS:
            frames, gt, init, cfg, res, _ = runs.get(seed)
            _, final = evaluate_accuracy(predictions_as_points(res.predictions), gt, 20.0)
            base = personalize(init, frames, cfg, seed)
            _, start = evaluate_accuracy(predictions_as_points(predict_all(base, frames)), gt, 20.0)
            gains.append((final, start))
        c.detail = ", ".join(f"seed {s}: {f:.1f} vs {b:.1f}" for s, (f, b) in zip(SEEDS, gains))
        assert all(f - b >= 10 for f, b in gains)


# --- 6: determinism across thread counts ------------------------------------

def test_criterion_6_cli_thread_determinism(tmp_path):
    with criterion(6, "byte-identical outputs across --threads") as c:
        (tmp_path / "scene.toml").write_text("[scene]\nn_frames = 60\n")
        video = tmp_path / "video"
        assert main(["synth", "--config", str(tmp_path / "scene.toml"), "--seed", "4",
                     "--coverage", "0.1", "--out", str(video)]) == 0
        outs = []
        for threads in (1, 4):
            out = tmp_path / f"run{threads}"
            assert main(["run", str(video / "frames"), str(video / "initial.jsonl"),
                         "--seed", "4", "--iterations", "2", "--threads", str(threads),
                         "--out", str(out)]) == 0
            outs.append(out)
        same = {n: (outs[0] / n).read_bytes() == (outs[1] / n).read_bytes()
                for n in ("annotations.jsonl", "predictions.jsonl")}
        c.detail = ", ".join(f"{n} {'identical' if v else 'differs'}" for n, v in same.items())
        assert all(same.values())


# --- 7: learners -------------------------------------------------------------

def test_criterion_7_learner_oracles():
    with criterion(7, "SVM, forest and k-means small-instance oracles") as c:
        worst = 0.0
        for seed in range(10):
            pos, neg = separable_instance(seed)
            m = train_svm(pos, neg, C=1e4, epochs=2000, tol=1e-7)
            ref = brute_force_max_margin(pos, neg)
            worst = max(worst, abs(np.linalg.norm(m.weights) - ref) / ref)

        rng = np.random.default_rng(0)
        X = np.vstack([rng.normal([0.9, 0.1, 0.1], 0.03, (80, 3)),
                       rng.normal([0.1, 0.2, 0.9], 0.03, (80, 3))])
        y = np.array([JointId.LWrist.value] * 80 + [BACKGROUND] * 80)
        forest = train_forest(X, y, ForestParams(trees=5, min_leaf=1), seed=1)
        train_acc = float((np.array(forest.labels)[forest.proba(X).argmax(1)] == y).mean())

        matched = 0
        for seed in range(6):
            rng = np.random.default_rng(seed)
            cols = rng.uniform(0, 1, (2, 3))
            feats = np.stack([
                rgb_vector(Patch(Point2(5, 5), 11, np.clip(
                    cols[k % 2] + rng.normal(0, 0.02, (11, 11, 3)), 0, 1).astype(np.float32)), 11)
                for k in range(12)])
            truth = brute_force_two_clusters(feats)
            matched += sorted(truth[i] for i in kmeans_medoid_indices(feats, 2, seed)) == [0, 1]
        c.detail = (f"SVM worst |w| error {100 * worst:.1f}%, forest training accuracy "
                    f"{100 * train_acc:.0f}%, k-means {matched}/6 instances")
        assert worst <= 0.10
        assert train_acc == 1.0
        assert matched == 6
