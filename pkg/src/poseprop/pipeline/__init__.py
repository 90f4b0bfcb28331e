from .metrics import annotation_accuracy, coverage_by_joint, evaluate_accuracy
from .personalize import PersonalizedDetector, personalize, predict_all, predict_frame, predictions_as_points
from .report import IterationReport, JointCounts, svg_chart, write_csv, write_svgs
from .run import PipelineState, RunResult, run, run_iteration, snapshot

__all__ = [
    "annotation_accuracy", "coverage_by_joint", "evaluate_accuracy", "PersonalizedDetector",
    "personalize", "predict_all", "predict_frame", "predictions_as_points", "IterationReport",
    "JointCounts", "svg_chart", "write_csv", "write_svgs", "PipelineState", "RunResult", "run",
    "run_iteration", "snapshot",
]
