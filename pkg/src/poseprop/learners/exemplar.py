"""Exemplar-SVM bank with negative-score calibration."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..core import Annotation, JointId
from ..errors import ArgumentError, TrainingError
from ..imageproc import Patch, hog
from .svm import LinearSvm, train_svm

MIN_NEGATIVES = 50
SIGMA_FLOOR = 1e-6
EXEMPLAR_C = 1.0


@dataclass
class Exemplar:
    patch: Patch
    svm: LinearSvm
    mu_neg: float
    sigma_neg: float
    annotation: Annotation | None = None

    def zscore(self, features) -> np.ndarray | float:
        return (self.svm.decision(features) - self.mu_neg) / self.sigma_neg


def hog_vector(patch: Patch) -> np.ndarray:
    return hog(patch).values


def train_exemplar_features(positive: np.ndarray, negatives: np.ndarray, seed: int = 0,
                            C: float = EXEMPLAR_C):
    """Single-positive SVM; calibration uses the half of the negatives not trained on."""
    negatives = np.asarray(negatives, dtype=np.float64)
    if len(negatives) < MIN_NEGATIVES:
        raise TrainingError(f"exemplar training needs >= {MIN_NEGATIVES} negatives, got {len(negatives)}")
    order = np.random.default_rng(seed).permutation(len(negatives))
    half = len(negatives) // 2
    train_neg, held = negatives[order[:half]], negatives[order[half:]]
    svm = train_svm(positive[None, :], train_neg, C=C, seed=seed,
                    pos_weight=float(len(train_neg)), feature_space="HOG")
    scores = held @ svm.weights + svm.bias
    return svm, float(scores.mean()), max(float(scores.std()), SIGMA_FLOOR)


def train_exemplar(medoid: Patch, negatives: list[Patch], seed: int = 0):
    """Returns (svm, mu_neg, sigma_neg) for one medoid patch."""
    if len(negatives) < MIN_NEGATIVES:
        raise TrainingError(f"exemplar training needs >= {MIN_NEGATIVES} negatives, got {len(negatives)}")
    neg = np.stack([hog_vector(p) for p in negatives])
    return train_exemplar_features(hog_vector(medoid), neg, seed)


class ExemplarBank:
    def __init__(self):
        self._by_joint: dict[JointId, list[Exemplar]] = {}
        self._stack: dict[JointId, tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]] = {}

    def add(self, joint: JointId, ex: Exemplar) -> None:
        self._by_joint.setdefault(joint, []).append(ex)
        self._stack.pop(joint, None)

    def exemplars(self, joint: JointId) -> list[Exemplar]:
        return self._by_joint.get(joint, [])

    def __len__(self):
        return sum(len(v) for v in self._by_joint.values())

    def _stacked(self, joint):
        if joint not in self._stack:
            exs = self._by_joint[joint]
            W = np.stack([e.svm.weights for e in exs])
            b = np.array([e.svm.bias for e in exs])
            mu = np.array([e.mu_neg for e in exs])
            sd = np.array([e.sigma_neg for e in exs])
            self._stack[joint] = (W, b, mu, sd)
        return self._stack[joint]

    def zscores(self, joint: JointId, features: np.ndarray) -> np.ndarray:
        """(n_candidates, n_exemplars) z-scores for HOG feature rows."""
        if not self._by_joint.get(joint):
            raise ArgumentError(f"exemplar bank is empty for {joint.name}")
        W, b, mu, sd = self._stacked(joint)
        return ((np.atleast_2d(features) @ W.T) + b - mu) / sd


def significance(bank: ExemplarBank, joint: JointId, candidate) -> tuple[float, int]:
    """Best calibrated z-score over the joint's exemplars and its index."""
    feats = hog_vector(candidate) if isinstance(candidate, Patch) else np.asarray(candidate)
    z = bank.zscores(joint, feats)[0]
    i = int(np.argmax(z))
    return float(z[i]), i
