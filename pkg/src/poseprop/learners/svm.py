"""L2-regularized hinge-loss linear SVM trained by dual coordinate descent."""

from __future__ import annotations

from dataclasses import dataclass, field

import numba
import numpy as np

from ..errors import TrainingError


@dataclass
class LinearSvm:
    weights: np.ndarray
    bias: float
    feature_space: str = "HOG"
    degenerate: bool = False
    objective: list = field(default_factory=list, repr=False)  # dual objective per epoch
    primal: list = field(default_factory=list, repr=False)

    def decision(self, x) -> np.ndarray | float:
        x = np.asarray(x, dtype=np.float64)
        s = x @ self.weights + self.bias
        return float(s) if np.ndim(s) == 0 else s

    def predict(self, x):
        return np.where(np.asarray(self.decision(x)) >= 0, 1, -1)


@numba.njit(cache=True)
def _dual_cd(X, y, upper, perms, tol):
    n, d = X.shape
    alpha = np.zeros(n)
    w = np.zeros(d)
    qd = np.empty(n)
    for i in range(n):
        qd[i] = np.dot(X[i], X[i])
    n_epochs = perms.shape[0]
    dual = np.empty(n_epochs)
    used = 0
    for ep in range(n_epochs):
        max_pg = -np.inf
        min_pg = np.inf
        for k in range(n):
            i = perms[ep, k]
            if qd[i] <= 0.0:
                continue
            g = y[i] * np.dot(w, X[i]) - 1.0
            pg = g
            if alpha[i] <= 0.0:
                pg = min(g, 0.0)
            elif alpha[i] >= upper[i]:
                pg = max(g, 0.0)
            if pg > max_pg:
                max_pg = pg
            if pg < min_pg:
                min_pg = pg
            if pg != 0.0:
                old = alpha[i]
                new = min(max(old - g / qd[i], 0.0), upper[i])
                delta = (new - old) * y[i]
                if delta != 0.0:
                    for j in range(d):
                        w[j] += delta * X[i, j]
                    alpha[i] = new
        dual[ep] = 0.5 * np.dot(w, w) - alpha.sum()
        used = ep + 1
        if max_pg - min_pg < tol:
            break
    return w, alpha, dual[:used]


def train_svm(pos, neg, C: float = 1.0, epochs: int = 200, seed: int = 0,
              pos_weight: float | None = None, feature_space: str = "HOG",
              tol: float = 1e-4) -> LinearSvm:
    """Train a linear SVM separating ``pos`` from ``neg``.

    Features are centred on the training mean and augmented with a unit bias
    column before optimization; the returned weights/bias act on raw
    features. ``pos_weight`` scales C for positives (default: balance the
    classes). ``objective`` holds the dual objective after each epoch and is
    non-increasing.
    """
    pos = np.atleast_2d(np.asarray(pos, dtype=np.float64))
    neg = np.atleast_2d(np.asarray(neg, dtype=np.float64))
    if pos.size == 0 or neg.size == 0 or len(pos) == 0 or len(neg) == 0:
        raise TrainingError("both classes need at least one sample")
    if pos.shape[1] != neg.shape[1]:
        raise TrainingError("feature dimensions differ between classes")
    if not (np.all(np.isfinite(pos)) and np.all(np.isfinite(neg))):
        raise TrainingError("non-finite features")
    X = np.vstack([pos, neg])
    y = np.concatenate([np.ones(len(pos)), -np.ones(len(neg))])
    mean = X.mean(axis=0)
    Xa = np.hstack([X - mean, np.ones((len(X), 1))])
    if pos_weight is None:
        pos_weight = len(neg) / len(pos)
    upper = np.where(y > 0, C * pos_weight, C)
    rng = np.random.default_rng(seed)
    perms = np.stack([rng.permutation(len(X)) for _ in range(epochs)])
    w_aug, alpha, dual = _dual_cd(Xa, y, upper, perms, tol)
    w = w_aug[:-1].copy()
    b = float(w_aug[-1] - w @ mean)
    margins = y * (X @ w + b)
    primal = 0.5 * float(w_aug @ w_aug) + float(np.sum(upper * np.maximum(0.0, 1.0 - margins)))
    degenerate = bool(np.linalg.norm(w) < 1e-8)
    return LinearSvm(w, b, feature_space, degenerate, [float(v) for v in dual], [primal])
