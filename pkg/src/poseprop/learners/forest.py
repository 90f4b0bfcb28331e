"""Random-forest part detector over multi-window RGB patch features."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from sklearn.ensemble import RandomForestClassifier

from ..core import JointId, Point2
from ..errors import ArgumentError, TrainingError
from ..imageproc import FOREST_GRID, FOREST_WINDOWS, WindowFeatures

BACKGROUND = -1


@dataclass
class ForestParams:
    trees: int = 12
    depth: int = 14
    min_leaf: int = 5
    windows: tuple = FOREST_WINDOWS
    grid: int = FOREST_GRID
    threads: int = 1


@dataclass
class ConfidenceMap:
    values: np.ndarray  # (ny, nx)
    xs: np.ndarray
    ys: np.ndarray

    def argmax(self) -> tuple[Point2, float]:
        iy, ix = np.unravel_index(int(np.argmax(self.values)), self.values.shape)
        return Point2(float(self.xs[ix]), float(self.ys[iy])), float(self.values[iy, ix])


def grid_axes(width: int, height: int, stride: int):
    stride = max(1, int(stride))
    ox = min((stride - 1) // 2, width - 1)
    oy = min((stride - 1) // 2, height - 1)
    return np.arange(ox, width, stride, dtype=np.float64), np.arange(oy, height, stride, dtype=np.float64)


class RandomForest:
    """Multi-class forest over {joints} + background.

    Class probabilities come from leaf class frequencies averaged over trees,
    so they lie in [0, 1] and sum to one at every location.
    """

    def __init__(self, model: RandomForestClassifier, params: ForestParams):
        self.model = model
        self.params = params
        self.labels = [int(c) for c in model.classes_]

    @property
    def joints(self) -> list[JointId]:
        return [JointId(c) for c in self.labels if c != BACKGROUND]

    def has_joint(self, joint: JointId) -> bool:
        return joint.value in self.labels

    def proba(self, features: np.ndarray) -> np.ndarray:
        features = np.asarray(features, dtype=np.float32)
        if len(features) == 0:
            return np.zeros((0, len(self.labels)))
        trees = self.model.estimators_
        if self.params.threads <= 1 or len(trees) < 2:
            return self.model.predict_proba(features)
        # sklearn's threaded predict_proba adds trees in completion order; summing
        # in tree order keeps the result bit-identical to the single-thread path
        with ThreadPoolExecutor(self.params.threads) as ex:
            parts = list(ex.map(lambda t: t.predict_proba(features, check_input=False), trees))
        total = parts[0].copy()
        for p in parts[1:]:
            total += p
        return total / len(trees)

    def column(self, joint: JointId) -> int:
        if not self.has_joint(joint):
            raise ArgumentError(f"forest was not trained for {joint.name}")
        return self.labels.index(joint.value)

    def features(self, frame, xs, ys) -> np.ndarray:
        return WindowFeatures(frame, self.params.windows, self.params.grid).features(xs, ys)

    def probability_maps(self, frame, stride: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(n_classes, ny, nx) probabilities on the stride grid, with grid axes."""
        h, w = np.asarray(frame).shape[:2]
        xs, ys = grid_axes(w, h, stride)
        gx, gy = np.meshgrid(xs, ys)
        feats = self.features(frame, gx.ravel(), gy.ravel())
        p = self.proba(feats)
        return p.T.reshape(len(self.labels), len(ys), len(xs)), xs, ys

    def leaf_tables(self):
        """Per-tree leaf class-probability tables (rows sum to one)."""
        out = []
        for est in self.model.estimators_:
            t = est.tree_
            leaves = t.children_left == -1
            v = t.value[leaves][:, 0, :]
            out.append(v / v.sum(axis=1, keepdims=True))
        return out


def forest_confidence_map(forest: RandomForest, frame, joint: JointId, stride: int) -> ConfidenceMap:
    col = forest.column(joint)
    maps, xs, ys = forest.probability_maps(frame, stride)
    return ConfidenceMap(maps[col], xs, ys)


def train_forest(features: np.ndarray, labels, params: ForestParams | None = None,
                 seed: int = 0) -> RandomForest:
    """Train on precomputed multi-window feature rows; labels are joint values or BACKGROUND."""
    params = params or ForestParams()
    features = np.asarray(features, dtype=np.float32)
    labels = np.asarray(labels, dtype=np.int64)
    if len(features) == 0:
        raise TrainingError("empty training set")
    if len(features) != len(labels):
        raise TrainingError("features and labels differ in length")
    present = set(labels.tolist())
    if BACKGROUND not in present:
        raise TrainingError("background samples are required")
    if len(present) < 2:
        raise TrainingError("at least one joint class is required besides background")
    model = RandomForestClassifier(
        n_estimators=params.trees, max_depth=params.depth, min_samples_leaf=params.min_leaf,
        max_features="sqrt", bootstrap=True, random_state=seed % (2**32),
        n_jobs=max(1, params.threads))
    model.fit(features, labels)
    return RandomForest(model, params)


def sample_features(frame, points, params: ForestParams | None = None) -> np.ndarray:
    """Multi-window features at integer-rounded points of one frame."""
    params = params or ForestParams()
    pts = np.rint(np.asarray(points, dtype=np.float64).reshape(-1, 2))
    if len(pts) == 0:
        return np.zeros((0, len(params.windows) * params.grid * params.grid * 3), np.float32)
    wf = WindowFeatures(frame, params.windows, params.grid)
    return wf.features(pts[:, 0], pts[:, 1])
