from .consensus import ConsensusResult, Verdict, consensus, mean_shift, parzen_density
from .evaluate import EvalStats, Evaluators, apply_self_evaluation, occluded_slots, train_evaluators
from .occlusion import (
    OCCLUSION_JOINTS,
    JointDetector,
    OcclusionDetector,
    detect_occlusion,
    layout_unoccluded,
    train_occlusion,
)
from .puppet import (
    PuppetArm,
    PuppetModel,
    correct_lower_arm,
    evaluate_lower_arm,
    limb_rectangle,
    rectify,
    train_puppet,
)

__all__ = [
    "ConsensusResult", "Verdict", "consensus", "mean_shift", "parzen_density",
    "EvalStats", "Evaluators", "apply_self_evaluation", "occluded_slots", "train_evaluators",
    "OCCLUSION_JOINTS", "JointDetector", "OcclusionDetector", "detect_occlusion",
    "layout_unoccluded", "train_occlusion", "PuppetArm", "PuppetModel", "correct_lower_arm",
    "evaluate_lower_arm", "limb_rectangle", "rectify", "train_puppet",
]
