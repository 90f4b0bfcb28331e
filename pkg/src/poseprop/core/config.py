"""Pipeline configuration and seed derivation."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np
import tomli

from ..errors import ConfigError


@dataclass
class PipelineConfig:
    accuracy_d: float = 20.0
    temporal_window: int = 30
    agreement_std_max: float = 20.0
    min_source_frames: int = 3
    clusters_per_joint: int = 200
    correction_samples: int = 25
    significance_min: float = 3.0
    parzen_sigma: float = 5.0
    iterations: int = 5
    rng_seed: int = 0

    # spatial matching
    spatial_enabled: bool = True
    conf_min: float = 0.5
    nms_radius: float = 10.0
    max_candidates_per_frame: int = 3
    detector_stride: int = 4
    exemplar_side: int = 33
    register_side: int = 49
    search_radius: int = 12
    registration_max_residual: float = 0.5
    exemplar_negatives: int = 200
    negative_min_dist: float = 40.0

    # temporal propagation
    temporal_enabled: bool = True

    # self-evaluation
    selfeval_enabled: bool = True
    correction_radius: float = 10.0
    limb_width: float = 24.0
    occlusion_window: int = 33
    min_puppet_pairs: int = 10

    # forest
    forest_trees: int = 12
    forest_depth: int = 14
    forest_min_leaf: int = 5
    background_per_frame: int = 12

    # execution / reporting
    threads: int = 0
    exclude_occluded_gt: bool = True
    scale_factor: float = 1.0

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        counts = ("temporal_window", "min_source_frames", "clusters_per_joint",
                  "max_candidates_per_frame", "detector_stride", "forest_trees",
                  "forest_depth", "forest_min_leaf", "min_puppet_pairs")
        for name in counts:
            if int(getattr(self, name)) < 1:
                raise ConfigError(name, "must be >= 1")
        for name in ("correction_samples", "iterations", "threads", "rng_seed",
                     "background_per_frame"):
            if int(getattr(self, name)) < 0:
                raise ConfigError(name, "must be >= 0")
        positive = ("accuracy_d", "agreement_std_max", "parzen_sigma", "nms_radius",
                    "correction_radius", "limb_width", "negative_min_dist", "scale_factor",
                    "registration_max_residual")
        for name in positive:
            if not float(getattr(self, name)) > 0:
                raise ConfigError(name, "must be > 0")
        for name in ("exemplar_side", "register_side", "occlusion_window"):
            v = int(getattr(self, name))
            if v < 9 or (v - 1) % 8:
                raise ConfigError(name, "must be 8k+1 with k >= 1")
        if not 0.0 <= self.conf_min <= 1.0:
            raise ConfigError("conf_min", "must lie in [0, 1]")
        if self.search_radius < 1:
            raise ConfigError("search_radius", "must be >= 1")

    def replace(self, **changes) -> "PipelineConfig":
        return dataclasses.replace(self, **changes)

    @classmethod
    def from_mapping(cls, data: dict) -> "PipelineConfig":
        known = {f.name: f for f in fields(cls)}
        kwargs = {}
        for key, value in data.items():
            if key not in known:
                raise ConfigError(key, "unknown configuration key")
            kwargs[key] = _coerce(key, known[key].type, value)
        return cls(**kwargs)

    @classmethod
    def from_file(cls, path, **overrides) -> "PipelineConfig":
        data = load_toml(path)
        data = data.get("pipeline", data)
        data = {k: v for k, v in data.items() if not isinstance(v, dict)}
        data.update({k: v for k, v in overrides.items() if v is not None})
        return cls.from_mapping(data)

    def to_toml(self) -> str:
        lines = ["[pipeline]"]
        for f in fields(self):
            lines.append(f"{f.name} = {_toml_value(getattr(self, f.name))}")
        return "\n".join(lines) + "\n"


def _coerce(key, typ, value):
    typ = str(typ)
    try:
        if typ == "bool":
            if not isinstance(value, bool):
                raise TypeError
            return value
        if typ == "int":
            if isinstance(value, bool) or (isinstance(value, float) and not value.is_integer()):
                raise TypeError
            return int(value)
        if typ == "float":
            if isinstance(value, bool):
                raise TypeError
            return float(value)
    except (TypeError, ValueError):
        raise ConfigError(key, f"expected {typ}, got {value!r}") from None
    return value


def _toml_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, int):
        return str(v)
    if isinstance(v, str):
        return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    raise TypeError(f"cannot encode {v!r}")


def load_toml(path) -> dict:
    try:
        with open(Path(path), "rb") as fh:
            return tomli.load(fh)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(str(path), f"malformed config: {exc}") from None


def derive_rng(seed: int, *keys: int) -> np.random.Generator:
    """Independent generator for a (seed, stage, ...) path; stable across runs."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), *map(int, keys)]))


def derive_seed(seed: int, *keys: int) -> int:
    return int(np.random.SeedSequence([int(seed), *map(int, keys)]).generate_state(1)[0])
