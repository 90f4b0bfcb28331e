"""Dense optical flow, point advection and patch registration."""

from __future__ import annotations

import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import cv2
import numba
import numpy as np

from .core import Point2
from .errors import ArgumentError, PipelineError
from .imageproc import Patch, as_float, bilinear_sample, lattice_gradients, orientation_channels

FORWARD = "forward"
BACKWARD = "backward"

LEVELS = 4
WINDOW_SIGMA = 4.0  # Gaussian LK window; centre weighting keeps small fast parts (hands) trackable
WARP_ITERS = 3
MEDIAN = 5
DAMPING = 1e-2  # per-pixel Tikhonov term, intensity units in [0, 255]
MAX_STEP = 0.5  # px per warp iteration; larger steps overshoot on diagonal motion

_MAGIC = b"PPFL"
_DIRS = {FORWARD: 0, BACKWARD: 1}


@dataclass
class FlowField:
    uv: np.ndarray  # (h, w, 2) float32, displacement in pixels
    direction: str = FORWARD

    @property
    def shape(self):
        return self.uv.shape[:2]


def _to_gray(img) -> np.ndarray:
    img = np.asarray(img)
    if img.ndim == 3:
        if img.dtype != np.uint8:
            img = np.clip(img * 255.0 if img.max() <= 1.0 else img, 0, 255).astype(np.uint8)
        img = cv2.cvtColor(img, cv2.COLOR_RGB2GRAY)
    return img.astype(np.float32)


def _lk_level(a, b, u, v):
    h, w = a.shape
    gx, gy = np.meshgrid(np.arange(w, dtype=np.float32), np.arange(h, dtype=np.float32))
    ax = cv2.Sobel(a, cv2.CV_32F, 1, 0, ksize=3, scale=0.125)
    ay = cv2.Sobel(a, cv2.CV_32F, 0, 1, ksize=3, scale=0.125)

    def win(x):
        return cv2.GaussianBlur(x, (0, 0), WINDOW_SIGMA)

    for _ in range(WARP_ITERS):
        bw = cv2.remap(b, gx + u, gy + v, cv2.INTER_LINEAR, borderMode=cv2.BORDER_REPLICATE)
        bx = cv2.Sobel(bw, cv2.CV_32F, 1, 0, ksize=3, scale=0.125)
        by = cv2.Sobel(bw, cv2.CV_32F, 0, 1, ksize=3, scale=0.125)
        ix = 0.5 * (ax + bx)
        iy = 0.5 * (ay + by)
        it = a - bw
        sxx = win(ix * ix) + DAMPING
        syy = win(iy * iy) + DAMPING
        sxy = win(ix * iy)
        bxv = win(ix * it)
        byv = win(iy * it)
        det = sxx * syy - sxy * sxy
        du = (syy * bxv - sxy * byv) / det
        dv = (sxx * byv - sxy * bxv) / det
        u = u + np.clip(du, -MAX_STEP, MAX_STEP)
        v = v + np.clip(dv, -MAX_STEP, MAX_STEP)
    u = cv2.medianBlur(np.ascontiguousarray(u, dtype=np.float32), MEDIAN)
    v = cv2.medianBlur(np.ascontiguousarray(v, dtype=np.float32), MEDIAN)
    return u, v


def compute_flow(a, b, direction: str = FORWARD, levels: int = LEVELS) -> FlowField:
    """Pyramidal iterative Lucas-Kanade flow mapping pixels of ``a`` into ``b``.

    Each level runs damped Gaussian-window LK warp iterations with a bounded step,
    then a 5x5 median filter; the damping keeps zero-texture regions at zero motion.
    """
    a = _to_gray(a)
    b = _to_gray(b)
    if a.shape != b.shape:
        raise ArgumentError(f"frame shapes differ: {a.shape} vs {b.shape}")
    pyr_a, pyr_b = [a], [b]
    for _ in range(levels - 1):
        if min(pyr_a[-1].shape) < 16:
            break
        pyr_a.append(cv2.pyrDown(pyr_a[-1]))
        pyr_b.append(cv2.pyrDown(pyr_b[-1]))
    h, w = pyr_a[-1].shape
    u = np.zeros((h, w), np.float32)
    v = np.zeros((h, w), np.float32)
    for lvl in range(len(pyr_a) - 1, -1, -1):
        la, lb = pyr_a[lvl], pyr_b[lvl]
        if u.shape != la.shape:
            size = (la.shape[1], la.shape[0])
            u = cv2.resize(u, size, interpolation=cv2.INTER_LINEAR) * 2.0
            v = cv2.resize(v, size, interpolation=cv2.INTER_LINEAR) * 2.0
        u, v = _lk_level(la, lb, u, v)
    uv = np.stack([u, v], axis=-1).astype(np.float32)
    uv[~np.isfinite(uv)] = 0.0
    return FlowField(uv, direction)


def advect(p: Point2, f: FlowField) -> Point2:
    h, w = f.shape
    if not (0 <= p.x <= w - 1 and 0 <= p.y <= h - 1):
        raise ArgumentError(f"point ({p.x}, {p.y}) outside {w}x{h} flow field")
    x, y, _ = advect_many(np.array([p.x]), np.array([p.y]), f)
    return Point2(float(x[0]), float(y[0]))


def advect_many(xs, ys, f: FlowField):
    """Advect many points; returns clamped (x, y) and a mask of points that stayed inside."""
    h, w = f.shape
    d = bilinear_sample(f.uv, xs, ys)
    nx = np.asarray(xs, dtype=np.float64) + d[..., 0]
    ny = np.asarray(ys, dtype=np.float64) + d[..., 1]
    inside = (nx >= 0) & (nx <= w - 1) & (ny >= 0) & (ny <= h - 1)
    return np.clip(nx, 0, w - 1), np.clip(ny, 0, h - 1), inside


def write_flow(path, f: FlowField) -> None:
    h, w = f.shape
    header = _MAGIC + struct.pack("<III", w, h, _DIRS[f.direction])
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(f.uv, dtype="<f4").tobytes())


def read_flow(path) -> FlowField:
    with open(path, "rb") as fh:
        header = fh.read(16)
        if len(header) != 16 or header[:4] != _MAGIC:
            raise ValueError(f"{path}: not a flow cache file")
        w, h, d = struct.unpack("<III", header[4:])
        data = np.frombuffer(fh.read(), dtype="<f4")
    if data.size != w * h * 2:
        raise ValueError(f"{path}: truncated flow raster")
    direction = {v: k for k, v in _DIRS.items()}[d]
    return FlowField(data.reshape(h, w, 2).astype(np.float32), direction)


class FlowProvider:
    """Adjacent-pair flows for a frame store, optionally cached on disk.

    ``get(t, FORWARD)`` is the flow t -> t+1, ``get(t, BACKWARD)`` is t -> t-1.
    Cache files are written once per pair and never rewritten.
    """

    def __init__(self, frames, cache_dir=None, threads: int = 1, memory_limit: int = 64):
        self.frames = frames
        self.cache_dir = Path(cache_dir) if cache_dir is not None else None
        if self.cache_dir is not None:
            self.cache_dir.mkdir(parents=True, exist_ok=True)
        self.threads = max(1, int(threads))
        self.memory_limit = memory_limit
        self._mem: dict[tuple[int, str], FlowField] = {}
        self.computed = 0

    def __len__(self):
        return len(self.frames)

    def _target(self, t, direction):
        return t + 1 if direction == FORWARD else t - 1

    def _path(self, t, direction):
        return self.cache_dir / f"flow_{t:06d}_{direction[0]}.flo"

    def _compute(self, t, direction) -> FlowField:
        s = self._target(t, direction)
        if not (0 <= t < len(self.frames) and 0 <= s < len(self.frames)):
            raise PipelineError(f"no frame pair for flow {t} ({direction})")
        if self.cache_dir is not None:
            p = self._path(t, direction)
            if p.exists():
                return read_flow(p)
        ff = compute_flow(self.frames[t], self.frames[s], direction)
        self.computed += 1
        if self.cache_dir is not None:
            p = self._path(t, direction)
            tmp = p.with_suffix(".tmp")
            write_flow(tmp, ff)
            tmp.replace(p)
        return ff

    def prefetch(self, pairs) -> None:
        todo = [p for p in pairs if p not in self._mem]
        if not todo:
            return
        if self.threads > 1 and len(todo) > 1:
            with ThreadPoolExecutor(self.threads) as ex:
                results = list(ex.map(lambda p: self._compute(*p), todo))
        else:
            results = [self._compute(*p) for p in todo]
        for p, r in zip(todo, results):
            self._mem[p] = r
        while len(self._mem) > self.memory_limit:
            self._mem.pop(next(iter(self._mem)))

    def get(self, t: int, direction: str) -> FlowField:
        key = (t, direction)
        if key not in self._mem:
            self.prefetch([key])
        return self._mem[key]


class StaticFlows:
    """Flow provider backed by precomputed fields, e.g. analytic test motion."""

    def __init__(self, forward, backward):
        self.forward = list(forward)
        self.backward = list(backward)

    def __len__(self):
        return len(self.forward) + 1

    def prefetch(self, pairs) -> None:
        pass

    def get(self, t, direction):
        if direction == FORWARD:
            if not 0 <= t < len(self.forward):
                raise PipelineError(f"no forward flow at {t}")
            return self.forward[t]
        if not 1 <= t <= len(self.backward):
            raise PipelineError(f"no backward flow at {t}")
        return self.backward[t - 1]


# ---------------------------------------------------------------------------
# patch registration

@dataclass
class DisplacementField:
    """Per-cell integer displacements mapping src cell centres into dst."""

    disp: np.ndarray  # (cells_y, cells_x, 2) as (dx, dy)
    centers: np.ndarray  # (cells,) cell-centre offsets in patch pixels (same both axes)
    residual: float
    level_residuals: list = field(default_factory=list)
    search_radius: int = 12

    def at(self, x: float, y: float) -> tuple[float, float]:
        """Bilinear lookup of the displacement at patch coordinate (x, y)."""
        c = self.centers
        fx = np.interp(x, c, np.arange(len(c), dtype=np.float64))
        fy = np.interp(y, c, np.arange(len(c), dtype=np.float64))
        d = bilinear_sample(self.disp.astype(np.float64), fx, fy)
        return float(d[0]), float(d[1])


REG_CELL = 8
REG_BINS = 9
REG_SMOOTH = 0.02
REG_STEPS = (4, 2, 1)


def dense_descriptors(img, cell: int = REG_CELL, bins: int = REG_BINS) -> np.ndarray:
    """Per-pixel 2x2-cell orientation histograms, L2 normalized (h, w, 4*bins)."""
    img = as_float(img).astype(np.float64)
    h, w = img.shape[:2]
    padded = cv2.copyMakeBorder(img, 0, 1, 0, 1, cv2.BORDER_REPLICATE)
    mag, ang = lattice_gradients(padded)
    planes = orientation_channels(mag, ang, bins).astype(np.float32)
    hist = np.stack([cv2.boxFilter(planes[..., k], -1, (cell, cell), normalize=False,
                                   borderType=cv2.BORDER_REPLICATE) for k in range(bins)], -1)
    half = cell // 2
    parts = []
    for dy in (-half, half):
        for dx in (-half, half):
            m = np.float32([[1, 0, -dx], [0, 1, -dy]])
            parts.append(np.stack([cv2.warpAffine(hist[..., k], m, (w, h),
                                                  borderMode=cv2.BORDER_REPLICATE)
                                   for k in range(bins)], -1))
    desc = np.concatenate(parts, axis=-1).astype(np.float64)
    norm = np.sqrt((desc * desc).sum(-1, keepdims=True))
    return desc / np.maximum(norm, 1e-3)


def _cell_centers(side, cell):
    n = (side - 1) // cell
    c0 = (side - 1) / 2.0 - cell * (n - 1) / 2.0
    return (c0 + cell * np.arange(n)).astype(np.float64)


def _energy(dx, dy, data, smooth, R):
    n = dx.shape[0]
    k = (dy + R) * (2 * R + 1) + (dx + R)
    e = data[np.arange(n)[:, None], np.arange(n)[None, :], k].sum()
    e += smooth * (np.abs(np.diff(dx, axis=0)).sum() + np.abs(np.diff(dy, axis=0)).sum())
    e += smooth * (np.abs(np.diff(dx, axis=1)).sum() + np.abs(np.diff(dy, axis=1)).sum())
    return float(e)


@numba.njit(cache=True)
def _data_cost(ds, dd, ci, R):
    n = ci.shape[0]
    side = dd.shape[0]
    L = 2 * R + 1
    D = ds.shape[2]
    out = np.empty((n, n, L * L))
    for i in range(n):
        for j in range(n):
            for ly in range(L):
                ty = min(max(ci[i] + ly - R, 0), side - 1)
                for lx in range(L):
                    tx = min(max(ci[j] + lx - R, 0), side - 1)
                    acc = 0.0
                    for k in range(D):
                        d = dd[ty, tx, k] - ds[ci[i], ci[j], k]
                        acc += d * d
                    out[i, j, ly * L + lx] = np.sqrt(acc)
    return out


@numba.njit(cache=True)
def _icm_level(data, dx, dy, R, smooth, span, step):
    n = dx.shape[0]
    L = 2 * R + 1
    for _ in range(20):
        changed = False
        for par in range(2):
            for i in range(n):
                for j in range(n):
                    if (i + j) % 2 != par:
                        continue
                    bx, by = dx[i, j], dy[i, j]
                    best = np.inf
                    # current label first so ties keep it
                    for t in range(-1, (2 * span // step + 1) ** 2):
                        if t < 0:
                            cx, cy = dx[i, j], dy[i, j]
                        else:
                            m = 2 * span // step + 1
                            cx = dx[i, j] + (t % m) * step - span
                            cy = dy[i, j] + (t // m) * step - span
                        if abs(cx) > R or abs(cy) > R:
                            continue
                        e = data[i, j, (cy + R) * L + (cx + R)]
                        if i > 0:
                            e += smooth * (abs(cx - dx[i - 1, j]) + abs(cy - dy[i - 1, j]))
                        if i < n - 1:
                            e += smooth * (abs(cx - dx[i + 1, j]) + abs(cy - dy[i + 1, j]))
                        if j > 0:
                            e += smooth * (abs(cx - dx[i, j - 1]) + abs(cy - dy[i, j - 1]))
                        if j < n - 1:
                            e += smooth * (abs(cx - dx[i, j + 1]) + abs(cy - dy[i, j + 1]))
                        if e < best - 1e-12:
                            best, bx, by = e, cx, cy
                    if bx != dx[i, j] or by != dy[i, j]:
                        dx[i, j], dy[i, j] = bx, by
                        changed = True
        if not changed:
            break


def register_patches(src: Patch, dst: Patch, search_radius: int = 12,
                     smooth: float = REG_SMOOTH, cell: int = REG_CELL) -> DisplacementField:
    """Register ``src`` onto ``dst`` with a discrete, smoothed per-cell search.

    Data cost is the Euclidean distance between dense orientation
    descriptors; neighbouring cells pay ``smooth`` per pixel of L1 displacement
    difference. The field starts at the best global translation and is then
    refined coarse-to-fine over displacement step sizes by checkerboard
    iterated conditional modes, so the energy never increases between levels.
    """
    sp, dp = as_float(src.pixels), as_float(dst.pixels)
    if sp.shape != dp.shape:
        raise ArgumentError(f"patch sizes differ: {sp.shape} vs {dp.shape}")
    side = sp.shape[0]
    R = int(search_radius)
    centers = _cell_centers(side, cell)
    n = len(centers)
    ds = dense_descriptors(sp, cell)
    dd = dense_descriptors(dp, cell)
    ci = np.rint(centers).astype(np.intp)
    src_desc = ds[ci[:, None], ci[None, :]]  # (n, n, D)

    data = _data_cost(ds, dd, ci, R)  # (n, n, L) with label (ly, lx) row-major
    L = 2 * R + 1

    # global translation start: zero smoothness cost, minimal summed data cost
    total = data.sum((0, 1))
    zero = R * L + R
    g = int(np.argmin(total)) if total.min() < total[zero] else zero
    dx = np.full((n, n), g % L - R, np.int64)
    dy = np.full((n, n), g // L - R, np.int64)
    level_res = []
    for li, step in enumerate(REG_STEPS):
        span = REG_STEPS[li - 1] if li else step
        _icm_level(data, dx, dy, R, float(smooth), span, step)
        level_res.append(_energy(dx, dy, data, smooth, R) / (n * n))
    disp = np.stack([dx, dy], -1).astype(np.float64)
    return DisplacementField(disp, centers, level_res[-1], level_res, R)
