"""Versioned single-file model container."""

from __future__ import annotations

import io
import pickle
import struct

MAGIC = b"POSEPROP"
VERSION = 1


def save_model(path, model, kind: str) -> None:
    payload = pickle.dumps(model, protocol=4)
    kind_b = kind.encode("ascii")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<HH", VERSION, len(kind_b)))
        fh.write(kind_b)
        fh.write(struct.pack("<Q", len(payload)))
        fh.write(payload)


def load_model(path, kind: str | None = None):
    with open(path, "rb") as fh:
        data = fh.read()
    buf = io.BytesIO(data)
    if buf.read(len(MAGIC)) != MAGIC:
        raise ValueError(f"{path}: not a model container")
    version, klen = struct.unpack("<HH", buf.read(4))
    if version != VERSION:
        raise ValueError(f"{path}: unsupported container version {version}")
    found = buf.read(klen).decode("ascii")
    if kind is not None and found != kind:
        raise ValueError(f"{path}: holds a {found!r} model, expected {kind!r}")
    (n,) = struct.unpack("<Q", buf.read(8))
    payload = buf.read(n)
    if len(payload) != n:
        raise ValueError(f"{path}: truncated model payload")
    return pickle.loads(payload)
