"""Line-delimited JSON readers and writers for annotations and ground truth."""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from ..errors import ParseError
from .annotations import Annotation, AnnotationSet, JointId, Origin, Point2, Provenance, Status
from .frames import GroundTruth


def annotation_to_dict(a: Annotation) -> dict:
    return {
        "frame": a.frame,
        "joint": a.joint.name,
        "x": a.pos.x,
        "y": a.pos.y,
        "confidence": a.confidence,
        "origin": a.provenance.origin.value,
        "source_frame": a.provenance.source_frame,
        "hop_count": a.provenance.hop_count,
        "status": a.status.value,
    }


def _dumps(obj) -> str:
    return json.dumps(obj, separators=(", ", ": "))


def write_annotations(path, annos) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for a in annos:
            fh.write(_dumps(annotation_to_dict(a)) + "\n")


def _lines(path):
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(path, lineno, f"invalid JSON ({exc.msg})") from None
            if not isinstance(obj, dict):
                raise ParseError(path, lineno, "expected a JSON object")
            yield lineno, obj


def _number(obj, key, path, lineno, cast=float):
    if key not in obj:
        raise ParseError(path, lineno, f"missing key {key!r}")
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ParseError(path, lineno, f"{key} must be a number")
    if cast is int and not float(v).is_integer():
        raise ParseError(path, lineno, f"{key} must be an integer")
    v = cast(v)
    if not math.isfinite(v):
        raise ParseError(path, lineno, f"{key} must be finite")
    return v


def _enum(obj, key, enum, path, lineno, default):
    if key not in obj:
        return default
    try:
        return enum(obj[key]) if enum is not JointId else JointId.parse(obj[key])
    except (ValueError, TypeError):
        raise ParseError(path, lineno, f"unknown {key} {obj[key]!r}") from None


def parse_annotation(obj: dict, path="<memory>", lineno=0) -> Annotation:
    if "joint" not in obj:
        raise ParseError(path, lineno, "missing key 'joint'")
    joint = _enum(obj, "joint", JointId, path, lineno, None)
    frame = _number(obj, "frame", path, lineno, int)
    if frame < 0:
        raise ParseError(path, lineno, "frame must be >= 0")
    x = _number(obj, "x", path, lineno)
    y = _number(obj, "y", path, lineno)
    conf = _number(obj, "confidence", path, lineno) if "confidence" in obj else 1.0
    origin = _enum(obj, "origin", Origin, path, lineno, Origin.Initial)
    status = _enum(obj, "status", Status, path, lineno, Status.Active)
    source = _number(obj, "source_frame", path, lineno, int) if "source_frame" in obj else frame
    if "hop_count" in obj:
        hops = _number(obj, "hop_count", path, lineno, int)
    else:
        hops = 0 if origin is Origin.Initial else 1
    try:
        prov = Provenance(origin, source, hops)
    except ValueError as exc:
        raise ParseError(path, lineno, str(exc)) from None
    return Annotation(frame, joint, Point2(x, y), conf, prov, status)


def read_annotations(path) -> AnnotationSet:
    out = AnnotationSet()
    for lineno, obj in _lines(path):
        out.add(parse_annotation(obj, path, lineno))
    return out


def write_ground_truth(path, gt: GroundTruth) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for f in range(gt.n_frames):
            for j in JointId:
                if not gt.has(f, j):
                    continue
                x, y = gt.positions[f, j.value]
                row = {
                    "frame": f, "joint": j.name, "x": float(x), "y": float(y),
                    "confidence": 1.0, "origin": Origin.Initial.value, "source_frame": f,
                    "status": Status.Active.value, "occluded": bool(gt.occluded[f, j.value]),
                }
                fh.write(_dumps(row) + "\n")


def read_ground_truth(path, n_frames: int | None = None) -> GroundTruth:
    rows = []
    for lineno, obj in _lines(path):
        a = parse_annotation(obj, path, lineno)
        occ = obj.get("occluded", False)
        if not isinstance(occ, bool):
            raise ParseError(path, lineno, "occluded must be a boolean")
        rows.append((a.frame, a.joint.value, a.pos.x, a.pos.y, occ))
    n = max((r[0] for r in rows), default=-1) + 1
    if n_frames is not None:
        n = max(n, n_frames)
    gt = GroundTruth.empty(n)
    for f, j, x, y, occ in rows:
        gt.positions[f, j] = (x, y)
        gt.occluded[f, j] = occ
    return gt


def write_jsonl(path, rows) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for r in rows:
            fh.write(_dumps(r) + "\n")


def read_predictions(path) -> dict:
    """Best Active prediction per (frame, joint) as {(frame, joint): (x, y, conf)}."""
    annos = read_annotations(path)
    out = {}
    for a in annos:
        if not a.active:
            continue
        key = (a.frame, a.joint)
        if key not in out or a.confidence > out[key][2]:
            out[key] = (a.pos.x, a.pos.y, a.confidence)
    return out


def predictions_to_array(preds: dict, n_frames: int) -> np.ndarray:
    arr = np.full((n_frames, len(JointId), 2), np.nan)
    for (f, j), (x, y, _) in preds.items():
        if f < n_frames:
            arr[f, j.value] = (x, y)
    return arr


def ensure_dir(path) -> Path:
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    return p
