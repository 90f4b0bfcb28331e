"""Patch sampling and the HOG / raw-RGB feature channels."""

from __future__ import annotations

from dataclasses import dataclass

import cv2
import numba
import numpy as np

from .core import Point2
from .errors import ArgumentError

HOG_CELL = 8
HOG_BINS = 9
HOG_BLOCK = 2
HOG_CLIP = 0.2
HOG_NORM = "L2-Hys"
FOREST_WINDOWS = (15, 31, 63)
FOREST_GRID = 5


@dataclass
class Patch:
    center: Point2
    side: int
    pixels: np.ndarray  # (side, side, 3) float32 in [0, 1]
    frame: int = -1


@dataclass
class HogDescriptor:
    values: np.ndarray
    cell: int
    bins: int
    cells_shape: tuple[int, int]
    normalization: str = HOG_NORM

    def __len__(self):
        return self.values.shape[0]


def as_float(img) -> np.ndarray:
    img = np.asarray(img)
    if img.dtype == np.uint8:
        return img.astype(np.float32) / 255.0
    return img.astype(np.float32, copy=False)


def bilinear_sample(img: np.ndarray, xs, ys) -> np.ndarray:
    """Sample ``img`` (h, w[, c]) at float coordinates with edge clamping."""
    h, w = img.shape[:2]
    xs = np.clip(np.asarray(xs, dtype=np.float64), 0.0, w - 1.0)
    ys = np.clip(np.asarray(ys, dtype=np.float64), 0.0, h - 1.0)
    x0 = np.floor(xs).astype(np.intp)
    y0 = np.floor(ys).astype(np.intp)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = xs - x0
    fy = ys - y0
    if img.ndim == 3:
        fx = fx[..., None]
        fy = fy[..., None]
    top = img[y0, x0] * (1 - fx) + img[y0, x1] * fx
    bot = img[y1, x0] * (1 - fx) + img[y1, x1] * fx
    return top * (1 - fy) + bot * fy


def extract_patch(frame, center: Point2, side: int, frame_index: int = -1) -> Patch:
    if side < 3 or side % 2 == 0:
        raise ArgumentError(f"patch side must be odd and >= 3, got {side}")
    img = as_float(frame)
    r = (side - 1) // 2
    offs = np.arange(-r, r + 1, dtype=np.float64)
    xs = center.x + offs[None, :]
    ys = center.y + offs[:, None]
    xs, ys = np.broadcast_arrays(xs, ys)
    pix = bilinear_sample(img, xs, ys).astype(np.float32)
    return Patch(center, side, pix, frame_index)


def _pixels(patch) -> np.ndarray:
    return as_float(patch.pixels if isinstance(patch, Patch) else patch)


def lattice_gradients(img: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Gradient magnitude and unsigned orientation on the pixel-corner lattice.

    For an (h, w) image the result is (h-1, w-1); every value sits between
    four pixels, so the lattice of an odd patch is centred on its centre pixel.
    Colour images use the channel with the largest magnitude per location.
    """
    if img.ndim == 2:
        img = img[..., None]
    a = img[:-1, :-1]
    b = img[:-1, 1:]
    c = img[1:, :-1]
    d = img[1:, 1:]
    gx = 0.5 * ((b - a) + (d - c))
    gy = 0.5 * ((c - a) + (d - b))
    mag2 = gx * gx + gy * gy
    best = np.argmax(mag2, axis=2)[..., None]
    gx = np.take_along_axis(gx, best, axis=2)[..., 0]
    gy = np.take_along_axis(gy, best, axis=2)[..., 0]
    mag = np.sqrt(np.take_along_axis(mag2, best, axis=2)[..., 0])
    ang = np.mod(np.arctan2(gy, gx), np.pi)
    return mag, ang


def orientation_channels(mag: np.ndarray, ang: np.ndarray, bins: int) -> np.ndarray:
    """Split magnitudes into ``bins`` orientation planes (linear bin voting)."""
    pos = ang * (bins / np.pi)
    lo = np.floor(pos).astype(np.intp)
    frac = pos - lo
    lo %= bins
    hi = (lo + 1) % bins
    out = np.zeros(mag.shape + (bins,), dtype=np.float64)
    rows, cols = np.indices(mag.shape)
    np.add.at(out, (rows, cols, lo), mag * (1 - frac))
    np.add.at(out, (rows, cols, hi), mag * frac)
    return out


def cell_histograms(patch, cell: int = HOG_CELL, bins: int = HOG_BINS) -> np.ndarray:
    """Per-cell orientation histograms, shape (cells_y, cells_x, bins)."""
    img = _pixels(patch)
    gh, gw = img.shape[0] - 1, img.shape[1] - 1
    if gh < cell or gw < cell or gh % cell or gw % cell:
        raise ArgumentError(
            f"patch of {img.shape[0]}x{img.shape[1]} gives a {gh}x{gw} gradient lattice "
            f"not divisible by cell {cell}")
    mag, ang = lattice_gradients(img.astype(np.float64))
    planes = orientation_channels(mag, ang, bins)
    cy, cx = gh // cell, gw // cell
    return planes.reshape(cy, cell, cx, cell, bins).sum(axis=(1, 3))


def normalize_blocks(cells: np.ndarray, block: int = HOG_BLOCK, clip=HOG_CLIP, eps=1e-6):
    cy, cx, bins = cells.shape
    by, bx = max(cy - block + 1, 1), max(cx - block + 1, 1)
    bh, bw = min(block, cy), min(block, cx)
    out = np.empty((by, bx, bh * bw * bins))
    for i in range(by):
        for j in range(bx):
            v = cells[i:i + bh, j:j + bw].ravel()
            v = v / np.sqrt(np.dot(v, v) + eps * eps)
            v = np.minimum(v, clip)
            v = v / np.sqrt(np.dot(v, v) + eps * eps)
            out[i, j] = v
    return out


def hog(patch, cell: int = HOG_CELL, bins: int = HOG_BINS) -> HogDescriptor:
    """HOG over 2x2-cell blocks with L2-Hys normalization.

    The gradient lattice of an s-pixel side has s-1 points, so (side - 1)
    must be a multiple of ``cell``; odd patches of side 8k+1 qualify.
    """
    cells = cell_histograms(patch, cell, bins)
    blocks = normalize_blocks(cells)
    return HogDescriptor(blocks.ravel(), cell, bins, cells.shape[:2])


def hog_length(side_y: int, side_x: int | None = None, cell=HOG_CELL, bins=HOG_BINS) -> int:
    side_x = side_y if side_x is None else side_x
    cy, cx = (side_y - 1) // cell, (side_x - 1) // cell
    by, bx = max(cy - 1, 1), max(cx - 1, 1)
    return by * bx * min(2, cy) * min(2, cx) * bins


def rgb_vector(patch, downsample_to) -> np.ndarray:
    """Area-averaged downsample, flattened with channels interleaved."""
    img = _pixels(patch)
    if isinstance(downsample_to, (tuple, list)):
        oh, ow = (int(v) for v in downsample_to)
    else:
        oh = ow = int(downsample_to)
    h, w = img.shape[:2]
    if oh < 1 or ow < 1 or oh > h or ow > w:
        raise ArgumentError(f"cannot downsample {h}x{w} to {oh}x{ow}")
    if (oh, ow) != (h, w):
        img = cv2.resize(np.ascontiguousarray(img), (ow, oh), interpolation=cv2.INTER_AREA)
    return np.clip(img, 0.0, 1.0).astype(np.float32).ravel()


class WindowFeatures:
    """Dense multi-window RGB features of one frame via a padded integral image.

    ``features(xs, ys)`` for integer centres equals concatenating
    ``rgb_vector(extract_patch(frame, c, W), grid)`` over the window sizes:
    the integral image is piecewise bilinear, so evaluating it at fractional
    cell edges gives exact area averages.
    """

    def __init__(self, frame, windows=FOREST_WINDOWS, grid=FOREST_GRID):
        self.windows = tuple(windows)
        self.grid = int(grid)
        img = as_float(frame).astype(np.float64)
        self.h, self.w = img.shape[:2]
        self.pad = max(self.windows) // 2 + 2
        padded = cv2.copyMakeBorder(img, self.pad, self.pad, self.pad, self.pad,
                                    cv2.BORDER_REPLICATE)
        ii = np.zeros((padded.shape[0] + 1, padded.shape[1] + 1, 3))
        ii[1:, 1:] = padded.cumsum(0).cumsum(1)
        self.ii = ii

    @property
    def n_features(self) -> int:
        return len(self.windows) * self.grid * self.grid * 3

    def features(self, xs, ys) -> np.ndarray:
        xs = np.asarray(xs, dtype=np.float64).ravel() + self.pad
        ys = np.asarray(ys, dtype=np.float64).ravel() + self.pad
        out = np.empty((xs.shape[0], self.n_features), np.float32)
        _window_features(self.ii, xs, ys, np.asarray(self.windows, np.float64), self.grid, out)
        return out


@numba.njit(cache=True)
def _integral_bilinear(ii, x, y, out):
    # pixel k of the padded image covers [k - 0.5, k + 0.5]; ii[k] = sum of pixels < k
    h, w = ii.shape[0], ii.shape[1]
    x = min(max(x + 0.5, 0.0), w - 1.0)
    y = min(max(y + 0.5, 0.0), h - 1.0)
    x0 = int(np.floor(x))
    y0 = int(np.floor(y))
    x1 = min(x0 + 1, w - 1)
    y1 = min(y0 + 1, h - 1)
    fx = x - x0
    fy = y - y0
    for c in range(3):
        top = ii[y0, x0, c] * (1 - fx) + ii[y0, x1, c] * fx
        bot = ii[y1, x0, c] * (1 - fx) + ii[y1, x1, c] * fx
        out[c] = top * (1 - fy) + bot * fy


@numba.njit(cache=True)
def _window_features(ii, xs, ys, windows, g, out):
    S = np.empty((g + 1, g + 1, 3))
    v = np.empty(3)
    for n in range(xs.shape[0]):
        col = 0
        for W in windows:
            step = W / g
            area = step * step
            for a in range(g + 1):
                ey = ys[n] - W / 2.0 + a * step
                for b in range(g + 1):
                    _integral_bilinear(ii, xs[n] - W / 2.0 + b * step, ey, v)
                    S[a, b, 0] = v[0]
                    S[a, b, 1] = v[1]
                    S[a, b, 2] = v[2]
            for a in range(g):
                for b in range(g):
                    for c in range(3):
                        m = (S[a + 1, b + 1, c] - S[a, b + 1, c] - S[a + 1, b, c] + S[a, b, c]) / area
                        out[n, col] = min(max(m, 0.0), 1.0)
                        col += 1
    return out


def window_stack_vector(frame, center: Point2, windows=FOREST_WINDOWS, grid=FOREST_GRID):
    """Reference (slow) multi-window feature: patch stack then rgb_vector each."""
    return np.concatenate([rgb_vector(extract_patch(frame, center, W), grid) for W in windows])
