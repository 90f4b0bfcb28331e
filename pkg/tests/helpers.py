"""Shared synthetic inputs for the test suite."""

import cv2
import numpy as np


def texture(h=96, w=128, seed=0, blur=1.5, color=False):
    rng = np.random.default_rng(seed)
    shape = (h, w, 3) if color else (h, w)
    img = rng.uniform(0, 1, shape).astype(np.float32)
    img = cv2.GaussianBlur(img, (0, 0), blur)
    img = (img - img.min()) / (img.max() - img.min())
    return (img * 255).astype(np.uint8)


def shifted(img, dx, dy):
    """Content moved by (+dx, +dy): out[y, x] = img[y - dy, x - dx], edges replicated."""
    h, w = img.shape[:2]
    m = np.float32([[1, 0, dx], [0, 1, dy]])
    return cv2.warpAffine(img, m, (w, h), flags=cv2.INTER_NEAREST, borderMode=cv2.BORDER_REFLECT)


def gt_annotations(gt, frames_idx, joints=None, noise=0.0, seed=0):
    """Initial annotations at (optionally noisy) ground truth of visible joints."""
    from poseprop.core import Annotation, AnnotationSet, JointId

    joints = tuple(JointId) if joints is None else joints
    rng = np.random.default_rng(seed)
    out = AnnotationSet()
    for f in frames_idx:
        for j in joints:
            if not gt.has(f, j) or gt.is_occluded(f, j):
                continue
            p = gt.position(f, j)
            dx, dy = rng.normal(0, noise, 2) if noise else (0.0, 0.0)
            out.add(Annotation.initial(int(f), j, p.x + dx, p.y + dy))
    return out


# scene overrides that drop the background clutter and lighting drift
PLAIN = dict(distractors=0, lighting_amp=0.0)


# criterion number -> (passed, detail); filled by test_acceptance, printed by conftest
ACCEPTANCE = {}


class criterion:
    """Context manager recording one acceptance criterion's verdict."""

    def __init__(self, number, title):
        self.number, self.title = number, title
        self.detail = ""

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        ok = exc_type is None
        detail = self.detail if ok else f"{self.detail} {exc_type.__name__}: {exc}".strip()
        ACCEPTANCE[self.number] = (ok, self.title, detail)
        return False
