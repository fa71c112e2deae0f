"""Extended IoU: a signed overlap measure for boxes, its losses, analytic
gradients, and a scale-steady descent rule."""

from .boxes import Box, OverlapClass, classify_overlap, decode, eiou, encode, extended_geometry, giou, parse_box, siou
from .errors import (
    DegenerateBox,
    DegenerateStep,
    DomainError,
    EIoUError,
    EmptyInput,
    EmptySample,
    InvalidBox,
    InvalidPower,
    NonFinite,
    NotFound,
    ParseError,
)
from .gradients import Grad4, grad_ie, grad_loss, grad_neg_eiou, grad_smooth_eiou, grad_ue, gradcheck_report
from .losses import Base, IoUScorePair, LossSpec, convexify, focal_weight, kl_iou_loss, smooth_eiou_loss, smooth_l1_loss
from .nms import ClusterSpec, Detection, ScoreSource, evaluate_selection, synth_clusters
from .optimizer import Mode, OptimConfig, Trace, run, step_plain, step_sot, sweep, theorem1_check
from .search import SearchBudget, giou_anomaly, misalign

__all__ = [
    "Base", "Box", "ClusterSpec", "DegenerateBox", "DegenerateStep", "Detection", "DomainError", "EIoUError",
    "EmptyInput", "EmptySample", "Grad4", "InvalidBox", "InvalidPower", "IoUScorePair", "LossSpec", "Mode",
    "NonFinite", "NotFound", "OptimConfig", "OverlapClass", "ParseError", "ScoreSource", "SearchBudget", "Trace",
    "classify_overlap", "convexify", "decode", "eiou", "encode", "evaluate_selection", "extended_geometry",
    "focal_weight", "giou", "giou_anomaly", "grad_ie", "grad_loss", "grad_neg_eiou", "grad_smooth_eiou",
    "grad_ue", "gradcheck_report", "kl_iou_loss", "misalign", "parse_box", "run", "siou",
    "smooth_eiou_loss", "smooth_l1_loss", "step_plain", "step_sot", "sweep", "synth_clusters", "theorem1_check",
]
