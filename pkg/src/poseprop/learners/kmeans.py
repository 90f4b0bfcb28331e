"""k-means over patch RGB vectors, returning actual patches as medoids."""

from __future__ import annotations

import numpy as np

from ..errors import ArgumentError
from ..imageproc import Patch, rgb_vector

KMEANS_GRID = 11
MAX_ITER = 100


def _sqdist(a, b):
    return np.maximum((a * a).sum(1)[:, None] - 2 * a @ b.T + (b * b).sum(1)[None, :], 0.0)


def kmeans(X: np.ndarray, k: int, seed: int = 0, max_iter: int = MAX_ITER):
    """Lloyd iterations from a k-means++ start. Returns (centroids, labels)."""
    X = np.asarray(X, dtype=np.float64)
    n = len(X)
    rng = np.random.default_rng(seed)
    centers = [X[rng.integers(n)]]
    d2 = ((X - centers[0]) ** 2).sum(1)
    for _ in range(1, k):
        total = d2.sum()
        if total <= 0:
            idx = int(rng.integers(n))
        else:
            idx = int(np.searchsorted(np.cumsum(d2), rng.uniform() * total))
            idx = min(idx, n - 1)
        centers.append(X[idx])
        d2 = np.minimum(d2, ((X - X[idx]) ** 2).sum(1))
    C = np.array(centers)
    labels = np.argmin(_sqdist(X, C), axis=1)
    for _ in range(max_iter):
        newC = C.copy()
        for c in range(k):
            members = X[labels == c]
            if len(members):
                newC[c] = members.mean(0)
        new_labels = np.argmin(_sqdist(X, newC), axis=1)
        C = newC
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
    return C, labels


def kmeans_medoid_indices(features: np.ndarray, k: int, seed: int = 0) -> list[int]:
    features = np.asarray(features, dtype=np.float64)
    n = len(features)
    if n == 0:
        raise ArgumentError("k-means needs at least one sample")
    if k < 1:
        raise ArgumentError("k must be >= 1")
    if k >= n:
        return list(range(n))
    C, _ = kmeans(features, k, seed)
    nearest = np.argmin(_sqdist(C, features), axis=1)
    out, seen = [], set()
    for i in nearest:
        if int(i) not in seen:
            seen.add(int(i))
            out.append(int(i))
    return out


def kmeans_medoids(patches: list[Patch], k: int, seed: int = 0, grid: int = KMEANS_GRID) -> list[Patch]:
    """Cluster patches on their RGB vectors; each centroid maps to its nearest patch."""
    if not patches:
        raise ArgumentError("k-means needs at least one patch")
    g = min(grid, patches[0].side)
    feats = np.stack([rgb_vector(p, g) for p in patches])
    return [patches[i] for i in kmeans_medoid_indices(feats, k, seed)]
