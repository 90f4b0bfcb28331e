from .annotations import (
    ARMS,
    JOINTS,
    N_JOINTS,
    SETTLED,
    SPATIAL_DECAY,
    TEMPORAL_DECAY,
    Annotation,
    AnnotationSet,
    JointId,
    Origin,
    Point2,
    Provenance,
    Status,
    consensus_cardinality,
    coverage,
)
from .config import PipelineConfig, derive_rng, derive_seed
from .frames import FrameStore, GroundTruth, normalization_factor, scale_annotations

__all__ = [
    "ARMS", "JOINTS", "N_JOINTS", "SETTLED", "SPATIAL_DECAY", "TEMPORAL_DECAY",
    "Annotation", "AnnotationSet", "JointId", "Origin", "Point2", "Provenance", "Status",
    "consensus_cardinality", "coverage", "PipelineConfig", "derive_rng", "derive_seed",
    "FrameStore", "GroundTruth", "normalization_factor", "scale_annotations",
]
