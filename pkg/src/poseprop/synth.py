"""Synthetic upper-body puppet videos with exact ground truth.

The figure is a textured torso, a head disc and two two-segment arms drawn as
anti-aliased capsules. Limb textures live in limb coordinates, so image
motion matches the kinematics and optical flow has something to lock onto.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field, fields
from pathlib import Path

import cv2
import numpy as np

from .core import AnnotationSet, FrameStore, GroundTruth, JointId, N_JOINTS, derive_rng
from .core.annotations import Annotation
from .core.config import _toml_value, load_toml
from .errors import ConfigError

PART_BG, PART_TORSO, PART_HEAD, PART_UPPER, PART_LOWER, PART_HAND, PART_OCCLUDER = range(7)


@dataclass
class OcclusionEvent:
    start: int
    end: int  # inclusive
    joints: tuple = ()
    rect: tuple | None = None  # (x0, y0, x1, y1) in image pixels
    size: tuple = (40.0, 40.0)  # used when rect is None: box centred on joints[0]
    color: tuple = (120, 105, 90)

    def box(self, joints_xy: np.ndarray, width: int, height: int):
        if self.rect is not None:
            return tuple(float(v) for v in self.rect)
        jx, jy = joints_xy[JointId.parse(self.joints[0]).value]
        w, h = self.size
        x0 = min(max(jx - w / 2, 0.0), width - 1 - w)
        y0 = min(max(jy - h / 2, 0.0), height - 1 - h)
        return (x0, y0, x0 + w, y0 + h)


@dataclass
class ArmMotion:
    upper_mean: float = 30.0
    upper_amp: float = 25.0
    upper_period: float = 97.0
    upper_phase: float = 0.0
    flex_mean: float = 60.0
    flex_amp: float = 40.0
    flex_period: float = 75.0
    flex_phase: float = 1.0

    def angles(self, t: float) -> tuple[float, float]:
        a1 = self.upper_mean + self.upper_amp * math.sin(2 * math.pi * t / self.upper_period + self.upper_phase)
        fl = self.flex_mean + self.flex_amp * math.sin(2 * math.pi * t / self.flex_period + self.flex_phase)
        return a1, fl


DEFAULT_MARKERS = {"LWrist": (225, 35, 35), "RWrist": (35, 190, 60)}


@dataclass
class SceneConfig:
    n_frames: int = 500
    width: int = 320
    height: int = 256
    torso_center: tuple = (160.0, 165.0)
    shoulder_width: float = 100.0
    shoulder_drop: float = 65.0  # shoulders sit this far above torso_center
    neck_length: float = 48.0
    head_radius: float = 21.0
    upper_arm: float = 55.0
    lower_arm: float = 50.0
    upper_radius: float = 9.0
    lower_radius: float = 7.0
    hand_radius: float = 8.0
    torso_half: tuple = (56.0, 78.0)
    left_arm: ArmMotion = field(default_factory=ArmMotion)
    right_arm: ArmMotion = field(default_factory=lambda: ArmMotion(
        upper_period=89.0, upper_phase=2.0, flex_period=67.0, flex_phase=2.5))
    angles: list | None = None  # explicit per-frame [L_upper, L_flex, R_upper, R_flex] degrees
    sway_amp: float = 5.0
    sway_period: float = 130.0
    camera_amp: tuple = (6.0, 3.0)
    camera_period: tuple = (150.0, 110.0)
    background: str = "textured"  # uniform | textured | scrolling
    background_color: tuple = (150, 160, 140)
    scroll_velocity: tuple = (1.0, 0.0)
    texture_strength: float = 0.35
    markers: dict = field(default_factory=lambda: dict(DEFAULT_MARKERS))
    shirt_color: tuple = (55, 75, 150)
    sleeve_color: tuple = (45, 62, 128)
    skin_color: tuple = (222, 176, 145)
    hair_color: tuple = (70, 45, 30)
    occlusions: list = field(default_factory=list)
    noise_sigma: float = 2.0
    # background clutter in body colours (discs, loose forearms) fixed to the background layer
    distractors: int = 150
    distractor_radius: tuple = (5.0, 10.0)
    # slow global exposure drift: gain 1 + amp * sin, with a per-channel phase lag
    lighting_amp: float = 0.3
    lighting_period: float = 170.0

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.n_frames < 1:
            raise ConfigError("n_frames", "must be >= 1")
        if self.width < 32 or self.height < 32:
            raise ConfigError("width" if self.width < 32 else "height", "must be >= 32")
        for name in ("shoulder_width", "neck_length", "head_radius", "upper_arm", "lower_arm",
                     "upper_radius", "lower_radius", "hand_radius"):
            if not getattr(self, name) > 0:
                raise ConfigError(name, "segment lengths and radii must be > 0")
        if self.background not in ("uniform", "textured", "scrolling"):
            raise ConfigError("background", f"unknown mode {self.background!r}")
        if self.noise_sigma < 0:
            raise ConfigError("noise_sigma", "must be >= 0")
        if self.distractors < 0:
            raise ConfigError("distractors", "must be >= 0")
        if not 0 < self.distractor_radius[0] <= self.distractor_radius[1]:
            raise ConfigError("distractor_radius", "needs 0 < min <= max")
        for name, color in self.markers.items():
            try:
                JointId.parse(name)
            except ValueError:
                raise ConfigError("markers", f"unknown joint {name!r}") from None
            if len(color) != 3:
                raise ConfigError("markers", f"color for {name} must have 3 components")
        if self.angles is not None:
            arr = np.asarray(self.angles, dtype=float)
            if arr.shape != (self.n_frames, 4):
                raise ConfigError("angles", f"expected shape ({self.n_frames}, 4), got {arr.shape}")
        for i, ev in enumerate(self.occlusions):
            if ev.end < ev.start:
                raise ConfigError(f"occlusions[{i}]", "end before start")
            for j in ev.joints:
                try:
                    JointId.parse(j)
                except ValueError:
                    raise ConfigError(f"occlusions[{i}]", f"unknown joint {j!r}") from None
            if ev.rect is not None:
                x0, y0, x1, y1 = ev.rect
                if not (0 <= x0 < x1 <= self.width - 1 and 0 <= y0 < y1 <= self.height - 1):
                    raise ConfigError(f"occlusions[{i}]", "occluder rectangle must lie inside the frame")
            elif not ev.joints:
                raise ConfigError(f"occlusions[{i}]", "needs a rect or a joint to follow")
        for t in range(self.n_frames):
            xy = joint_positions(self, t)
            if not (np.all(xy[:, 0] >= 0) and np.all(xy[:, 0] <= self.width - 1)
                    and np.all(xy[:, 1] >= 0) and np.all(xy[:, 1] <= self.height - 1)):
                raise ConfigError("motion", f"joints leave the frame at t={t}")

    @classmethod
    def from_mapping(cls, data: dict) -> "SceneConfig":
        data = dict(data)
        known = {f.name for f in fields(cls)}
        for key in data:
            if key not in known:
                raise ConfigError(key, "unknown scene key")
        for arm in ("left_arm", "right_arm"):
            if arm in data:
                try:
                    data[arm] = ArmMotion(**data[arm])
                except TypeError as exc:
                    raise ConfigError(arm, str(exc)) from None
        if "occlusions" in data:
            evs = []
            for i, ev in enumerate(data["occlusions"]):
                try:
                    ev = dict(ev)
                    if "frames" in ev:
                        ev["start"], ev["end"] = ev.pop("frames")
                    for key in ("joints", "rect", "size", "color"):
                        if ev.get(key) is not None:
                            ev[key] = tuple(ev[key])
                    evs.append(OcclusionEvent(**ev))
                except (TypeError, ValueError) as exc:
                    raise ConfigError(f"occlusions[{i}]", str(exc)) from None
            data["occlusions"] = evs
        for key in ("torso_center", "torso_half", "camera_amp", "camera_period",
                    "background_color", "scroll_velocity", "shirt_color", "sleeve_color",
                    "skin_color", "hair_color", "distractor_radius"):
            if key in data:
                data[key] = tuple(data[key])
        if "markers" in data:
            data["markers"] = {k: tuple(v) for k, v in data["markers"].items()}
        return cls(**data)

    @classmethod
    def from_file(cls, path) -> "SceneConfig":
        data = load_toml(path)
        return cls.from_mapping(data.get("scene", data))


# ---------------------------------------------------------------------------
# kinematics

def _arm_angles(cfg: SceneConfig, t: int):
    if cfg.angles is not None:
        la, lf, ra, rf = cfg.angles[t]
        return (la, lf), (ra, rf)
    return cfg.left_arm.angles(t), cfg.right_arm.angles(t)


def camera_offset(cfg: SceneConfig, t: int) -> tuple[float, float]:
    ax, ay = cfg.camera_amp
    px, py = cfg.camera_period
    return (ax * math.sin(2 * math.pi * t / px), ay * math.sin(2 * math.pi * t / py))


def joint_positions(cfg: SceneConfig, t: int) -> np.ndarray:
    """Image-space (7, 2) joint positions at frame t (forward kinematics)."""
    cx, cy = cfg.torso_center
    cx += cfg.sway_amp * math.sin(2 * math.pi * t / cfg.sway_period)
    ox, oy = camera_offset(cfg, t)
    cx -= ox
    cy -= oy
    sy = cy - cfg.shoulder_drop
    out = np.zeros((N_JOINTS, 2))
    out[JointId.Head.value] = (cx, sy - cfg.neck_length)
    (la1, lfl), (ra1, rfl) = _arm_angles(cfg, t)
    for side, a1, fl, sh, el, wr in ((1, la1, lfl, JointId.LShoulder, JointId.LElbow, JointId.LWrist),
                                     (-1, ra1, rfl, JointId.RShoulder, JointId.RElbow, JointId.RWrist)):
        s = np.array((cx + side * cfg.shoulder_width / 2, sy))
        r1 = math.radians(a1)
        r2 = math.radians(a1 - fl)
        e = s + cfg.upper_arm * np.array((side * math.sin(r1), math.cos(r1)))
        w = e + cfg.lower_arm * np.array((side * math.sin(r2), math.cos(r2)))
        out[sh.value], out[el.value], out[wr.value] = s, e, w
    return out


# ---------------------------------------------------------------------------
# rendering

def _smooth_noise(rng, shape, scale):
    h, w = shape[:2]
    lo = rng.uniform(0, 1, (max(2, h // scale + 2), max(2, w // scale + 2)) + shape[2:]).astype(np.float32)
    up = cv2.resize(lo, (w, h), interpolation=cv2.INTER_CUBIC)
    fine = rng.uniform(0, 1, shape).astype(np.float32)
    up = 0.7 * up + 0.3 * cv2.GaussianBlur(fine, (0, 0), 1.0)
    up -= up.min()
    return up / max(float(up.max()), 1e-6)


class _Textures:
    def __init__(self, cfg: SceneConfig, seed: int):
        rng = derive_rng(seed, 7001)
        pad = 64 + int(max(abs(v) for v in cfg.camera_amp))
        extent = cfg.n_frames * max(abs(v) for v in cfg.scroll_velocity) if cfg.background == "scrolling" else 0
        bh = cfg.height + 2 * pad + int(extent)
        bw = cfg.width + 2 * pad + int(extent)
        bg = _smooth_noise(rng, (bh, bw, 3), 6)
        self.bg_pad = pad
        self.background = bg
        self.torso = _smooth_noise(rng, (256, 256), 4)
        self.head = _smooth_noise(rng, (96, 96), 3)
        self.limbs = [_smooth_noise(rng, (128, 48), 3) for _ in range(4)]
        self.occluder = _smooth_noise(rng, (128, 128), 3)
        self.clutter = _clutter_layer(cfg, rng, bh, bw) if cfg.distractors else None


def _clutter_layer(cfg: SceneConfig, rng, bh, bw):
    """RGBA layer (colour premultiplied) of body-like clutter over the background extent.

    Alternates plain discs in body colours with loose "forearms": a sleeve
    capsule, a skin capsule and a hand disc at a random orientation.
    """
    hands = [cfg.skin_color, *cfg.markers.values()]
    palette = [cfg.skin_color, cfg.sleeve_color, cfg.hair_color, *cfg.markers.values()]
    layer = np.zeros((bh, bw, 4), np.float32)
    lo, hi = cfg.distractor_radius

    def paint(pts, sdf_fn, color, margin):
        x0 = int(max(min(p[0] for p in pts) - margin, 0))
        x1 = int(min(max(p[0] for p in pts) + margin + 1, bw))
        y0 = int(max(min(p[1] for p in pts) - margin, 0))
        y1 = int(min(max(p[1] for p in pts) + margin + 1, bh))
        if x1 <= x0 or y1 <= y0:
            return
        ys, xs = np.mgrid[y0:y1, x0:x1].astype(np.float32)
        a = _coverage(sdf_fn(xs, ys))[..., None]
        sub = layer[y0:y1, x0:x1]
        sub[..., :3] = sub[..., :3] * (1 - a) + np.asarray(color, np.float32) * a
        sub[..., 3:] = np.maximum(sub[..., 3:], a)

    def disc(c, r, color):
        paint([c], lambda xs, ys: np.hypot(xs - c[0], ys - c[1]) - r, color, r + 2)

    def capsule(a, b, r, color):
        def sdf(xs, ys):
            u, v, L = _seg_local(xs, ys, a, b)
            return np.hypot(u - np.clip(u, 0, L), v) - r
        paint([a, b], sdf, color, r + 2)

    for k in range(cfg.distractors):
        c = np.array((rng.uniform(0, bw), rng.uniform(0, bh)))
        r = rng.uniform(lo, hi)
        if k % 2 == 0:
            disc(c, r, palette[rng.integers(len(palette))])
            continue
        t1 = rng.uniform(0, 2 * math.pi)
        t2 = t1 + rng.uniform(-1.2, 1.2)
        e = c + cfg.upper_arm * 0.6 * np.array((math.cos(t1), math.sin(t1)))
        w = e + cfg.lower_arm * np.array((math.cos(t2), math.sin(t2)))
        capsule(c, e, cfg.upper_radius, cfg.sleeve_color)
        capsule(e, w, cfg.lower_radius, cfg.skin_color)
        disc(w, cfg.hand_radius, hands[rng.integers(len(hands))])
    return layer


def _coverage(sdf):
    return np.clip(0.5 - sdf, 0.0, 1.0)


def _seg_local(px, py, a, b):
    d = b - a
    L = max(math.hypot(*d), 1e-9)
    ux, uy = d / L
    rx, ry = px - a[0], py - a[1]
    u = rx * ux + ry * uy
    v = -rx * uy + ry * ux
    return u, v, L


def _bbox(cfg, pts, margin):
    pts = np.asarray(pts, dtype=float).reshape(-1, 2)
    x0 = int(max(math.floor(pts[:, 0].min() - margin), 0))
    y0 = int(max(math.floor(pts[:, 1].min() - margin), 0))
    x1 = int(min(math.ceil(pts[:, 0].max() + margin) + 1, cfg.width))
    y1 = int(min(math.ceil(pts[:, 1].max() + margin) + 1, cfg.height))
    return x0, y0, x1, y1


def _tex_lookup(tex, u, v):
    th, tw = tex.shape[:2]
    mx = cv2.remap(tex, np.mod(v, tw).astype(np.float32), np.mod(u, th).astype(np.float32),
                   cv2.INTER_LINEAR, borderMode=cv2.BORDER_WRAP)
    return mx


def _draw_capsule(canvas, labels, cfg, tex, a, b, radius, color, strength, part):
    x0, y0, x1, y1 = _bbox(cfg, [a, b], radius + 2)
    if x1 <= x0 or y1 <= y0:
        return
    ys, xs = np.mgrid[y0:y1, x0:x1].astype(np.float32)
    u, v, L = _seg_local(xs, ys, a, b)
    uc = np.clip(u, 0, L)
    sdf = np.hypot(u - uc, v) - radius
    alpha = _coverage(sdf)
    shade = 1.0 - strength / 2 + strength * _tex_lookup(tex, u + 64, v + 24)
    col = np.asarray(color, np.float32)[None, None, :] * shade[..., None]
    _paint_tex(canvas, labels, x0, y0, alpha, col, part)


def _paint_tex(canvas, labels, x0, y0, alpha, col, part):
    h, w = alpha.shape
    region = canvas[y0:y0 + h, x0:x0 + w]
    a = alpha[..., None]
    region *= 1 - a
    region += a * col
    if labels is not None:
        lab = labels[y0:y0 + h, x0:x0 + w]
        lab[alpha >= 0.5] = part


def _draw_disc(canvas, labels, cfg, tex, c, radius, color, strength, part, tex_origin=None):
    x0, y0, x1, y1 = _bbox(cfg, [c], radius + 2)
    if x1 <= x0 or y1 <= y0:
        return
    ys, xs = np.mgrid[y0:y1, x0:x1].astype(np.float32)
    sdf = np.hypot(xs - c[0], ys - c[1]) - radius
    alpha = _coverage(sdf)
    o = c if tex_origin is None else tex_origin
    shade = 1.0 - strength / 2 + strength * _tex_lookup(tex, ys - o[1] + 48, xs - o[0] + 48)
    col = np.asarray(color, np.float32)[None, None, :] * shade[..., None]
    _paint_tex(canvas, labels, x0, y0, alpha, col, part)


def _draw_torso(canvas, labels, cfg, tex, center, strength):
    hx, hy = cfg.torso_half
    r = 16.0
    x0, y0, x1, y1 = _bbox(cfg, [center], max(hx, hy) + 2)
    ys, xs = np.mgrid[y0:y1, x0:x1].astype(np.float32)
    qx = np.abs(xs - center[0]) - (hx - r)
    qy = np.abs(ys - center[1]) - (hy - r)
    sdf = np.hypot(np.maximum(qx, 0), np.maximum(qy, 0)) + np.minimum(np.maximum(qx, qy), 0) - r
    alpha = _coverage(sdf)
    shade = 1.0 - strength / 2 + strength * _tex_lookup(tex, ys - center[1] + 128, xs - center[0] + 128)
    col = np.asarray(cfg.shirt_color, np.float32)[None, None, :] * shade[..., None]
    _paint_tex(canvas, labels, x0, y0, alpha, col, PART_TORSO)


def lighting_gain(cfg: SceneConfig, t: int) -> np.ndarray:
    ph = 2 * math.pi * t / cfg.lighting_period
    return np.array([1.0 + cfg.lighting_amp * math.sin(ph + k * 0.9) for k in range(3)], np.float32)


def occlusion_boxes(cfg: SceneConfig, t: int, xy: np.ndarray):
    return [ev.box(xy, cfg.width, cfg.height) for ev in cfg.occlusions if ev.start <= t <= ev.end]


def render_frame(cfg: SceneConfig, t: int, textures: _Textures, seed: int, with_labels=False):
    xy = joint_positions(cfg, t)
    H, W = cfg.height, cfg.width
    ox, oy = camera_offset(cfg, t)
    if cfg.background == "uniform":
        canvas = np.empty((H, W, 3), np.float32)
        canvas[:] = np.asarray(cfg.background_color, np.float32)
    else:
        sx, sy = (0.0, 0.0)
        if cfg.background == "scrolling":
            sx, sy = cfg.scroll_velocity[0] * t, cfg.scroll_velocity[1] * t
        p = textures.bg_pad
        m = np.float32([[1, 0, p + ox + sx], [0, 1, p + oy + sy]])
        bg = cv2.warpAffine(textures.background, m, (W, H),
                            flags=cv2.INTER_LINEAR | cv2.WARP_INVERSE_MAP,
                            borderMode=cv2.BORDER_REFLECT)
        base = np.asarray(cfg.background_color, np.float32)
        canvas = base * (0.45 + 1.1 * bg)
        if textures.clutter is not None:
            cl = cv2.warpAffine(textures.clutter, m, (W, H),
                                flags=cv2.INTER_LINEAR | cv2.WARP_INVERSE_MAP,
                                borderMode=cv2.BORDER_REFLECT)
            a = cl[..., 3:]
            canvas = canvas * (1 - a) + cl[..., :3] * (0.8 + 0.4 * bg)
    labels = np.full((H, W), PART_BG, np.uint8) if with_labels else None
    s = cfg.texture_strength
    J = JointId
    shoulder_mid = (xy[J.LShoulder.value] + xy[J.RShoulder.value]) / 2
    torso_c = shoulder_mid + np.array((0.0, cfg.shoulder_drop))
    _draw_torso(canvas, labels, cfg, textures.torso, torso_c, s)
    _draw_capsule(canvas, labels, cfg, textures.torso, shoulder_mid, xy[J.Head.value],
                  8.0, cfg.skin_color, s * 0.5, PART_HEAD)
    _draw_disc(canvas, labels, cfg, textures.head, xy[J.Head.value], cfg.head_radius,
               cfg.skin_color, s, PART_HEAD)
    hc = xy[J.Head.value] + np.array((0.0, -cfg.head_radius * 0.55))
    _draw_disc(canvas, labels, cfg, textures.head, hc, cfg.head_radius * 0.6, cfg.hair_color,
               s, PART_HEAD, tex_origin=xy[J.Head.value])
    for k, (sh, el, wr) in enumerate(((J.RShoulder, J.RElbow, J.RWrist),
                                      (J.LShoulder, J.LElbow, J.LWrist))):
        _draw_capsule(canvas, labels, cfg, textures.limbs[2 * k], xy[sh.value], xy[el.value],
                      cfg.upper_radius, cfg.sleeve_color, s, PART_UPPER)
        _draw_capsule(canvas, labels, cfg, textures.limbs[2 * k + 1], xy[el.value], xy[wr.value],
                      cfg.lower_radius, cfg.skin_color, s, PART_LOWER)
        color = cfg.markers.get(wr.name, cfg.skin_color)
        _draw_disc(canvas, labels, cfg, textures.head, xy[wr.value], cfg.hand_radius, color,
                   s * 0.6, PART_HAND, tex_origin=xy[el.value])
        for jn in (sh, el):
            if jn.name in cfg.markers:
                _draw_disc(canvas, labels, cfg, textures.head, xy[jn.value], 5.0,
                           cfg.markers[jn.name], s * 0.6, PART_UPPER)
    if J.Head.name in cfg.markers:
        _draw_disc(canvas, labels, cfg, textures.head, xy[J.Head.value], 6.0,
                   cfg.markers[J.Head.name], s * 0.6, PART_HEAD)
    for ev, box in zip([e for e in cfg.occlusions if e.start <= t <= e.end], occlusion_boxes(cfg, t, xy)):
        x0, y0, x1, y1 = box
        ys, xs = np.mgrid[0:H, 0:W].astype(np.float32)
        sdf = np.maximum.reduce([x0 - xs, xs - x1, y0 - ys, ys - y1])
        alpha = _coverage(sdf)
        shade = 0.7 + 0.6 * _tex_lookup(textures.occluder, ys, xs)
        col = np.asarray(ev.color, np.float32)[None, None, :] * shade[..., None]
        _paint_tex(canvas, labels, 0, 0, alpha, col, PART_OCCLUDER)
    if cfg.lighting_amp:
        canvas = canvas * lighting_gain(cfg, t)[None, None, :]
    if cfg.noise_sigma > 0:
        rng = derive_rng(seed, 7002, t)
        canvas = canvas + rng.normal(0.0, cfg.noise_sigma, canvas.shape).astype(np.float32)
    img = np.clip(np.rint(canvas), 0, 255).astype(np.uint8)
    return (img, labels) if with_labels else img


def ground_truth(cfg: SceneConfig) -> GroundTruth:
    gt = GroundTruth.empty(cfg.n_frames)
    for t in range(cfg.n_frames):
        xy = joint_positions(cfg, t)
        gt.positions[t] = xy
        for (x0, y0, x1, y1) in occlusion_boxes(cfg, t, xy):
            inside = (xy[:, 0] >= x0) & (xy[:, 0] <= x1) & (xy[:, 1] >= y0) & (xy[:, 1] <= y1)
            gt.occluded[t] |= inside
    return gt


def generate_video(cfg: SceneConfig, seed: int = 0) -> tuple[FrameStore, GroundTruth]:
    cfg.validate()
    tex = _Textures(cfg, seed)
    frames = np.stack([render_frame(cfg, t, tex, seed) for t in range(cfg.n_frames)])
    return FrameStore(frames), ground_truth(cfg)


def render_labels(cfg: SceneConfig, t: int, seed: int = 0) -> np.ndarray:
    """Part-id map of frame t (for geometry checks)."""
    return render_frame(cfg, t, _Textures(cfg, seed), seed, with_labels=True)[1]


def simulate_initializer(gt: GroundTruth, coverage_frac: float, position_noise_sigma: float,
                         fp_rate: float, seed: int = 0, width: int | None = None,
                         height: int | None = None, emit_prob: float = 0.8) -> AnnotationSet:
    """Sparse, precise Initial annotations standing in for a generic pose detector."""
    rng = derive_rng(seed, 7100)
    n = gt.n_frames
    k = min(n, int(math.ceil(coverage_frac * n - 1e-9)))
    out = AnnotationSet()
    if k <= 0:
        return out
    if width is None or height is None:
        finite = gt.positions[np.isfinite(gt.positions).all(axis=2)]
        width = width or int(math.ceil(finite[:, 0].max())) + 1
        height = height or int(math.ceil(finite[:, 1].max())) + 1
    frames = np.sort(rng.choice(n, size=k, replace=False))
    for f in frames:
        for j in JointId:
            draw_emit, draw_fp = rng.uniform(), rng.uniform()
            noise = rng.normal(0.0, 1.0, 2) * position_noise_sigma
            fp_xy = rng.uniform((0, 0), (width - 1, height - 1))
            if not gt.has(f, j) or gt.is_occluded(f, j) or draw_emit >= emit_prob:
                continue
            if draw_fp < fp_rate:
                x, y = fp_xy
            else:
                x, y = gt.positions[f, j.value] + noise
            x = min(max(float(x), 0.0), width - 1.0)
            y = min(max(float(y), 0.0), height - 1.0)
            out.add(Annotation.initial(int(f), j, x, y, 1.0))
    return out


def default_scene(**overrides) -> SceneConfig:
    return SceneConfig(**overrides)


def scene_to_toml(cfg: SceneConfig) -> str:
    """TOML text that ``SceneConfig.from_file`` reads back to an equal config."""
    data = dataclasses.asdict(cfg)
    tables = {k: data.pop(k) for k in ("left_arm", "right_arm", "markers")}
    occ = data.pop("occlusions")
    lines = ["[scene]"]
    for k, v in data.items():
        if v is not None:
            lines.append(f"{k} = {_toml_value(v)}")
    for name, tab in tables.items():
        lines.append(f"\n[scene.{name}]")
        lines.extend(f"{k} = {_toml_value(v)}" for k, v in tab.items())
    for ev in occ:
        lines.append("\n[[scene.occlusions]]")
        lines.extend(f"{k} = {_toml_value(v)}" for k, v in ev.items() if v is not None)
    return "\n".join(lines) + "\n"
