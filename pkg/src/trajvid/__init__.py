"""Desk-scale trajectory/text/reference conditioned video event generation."""

from trajvid.attention import (
    AttentionBias,
    build_bias,
    coverage_region,
    sawca,
    tokens_in_region,
)
from trajvid.metrics import EvalReport, evaluate, evaluate_cases, oracle_track
from trajvid.model import (
    FlowSample,
    ModelConfig,
    VelocityModel,
    fm_interpolate,
    fm_loss,
    load_checkpoint,
    make_model,
    prepare_conditioning,
    sample,
    save_checkpoint,
)
from trajvid.text import VOCAB, CaptionSpan, caption_spans, tokenize
from trajvid.training import TrainConfig, TrainResult, train
from trajvid.triplet import (
    BBox,
    Caption,
    MultimodalTriplet,
    ReferencePlacement,
    TrajectoryTrack,
    TripletError,
    ValidationReport,
    Violation,
    emit_triplet,
    in_frame,
    parse_triplet,
    resample_track,
    validate_triplet,
)

__version__ = "0.1.0"

__all__ = [
    "AttentionBias",
    "BBox",
    "CaptionSpan",
    "EvalReport",
    "FlowSample",
    "ModelConfig",
    "TrainConfig",
    "TrainResult",
    "VelocityModel",
    "VOCAB",
    "evaluate",
    "evaluate_cases",
    "fm_interpolate",
    "fm_loss",
    "load_checkpoint",
    "make_model",
    "oracle_track",
    "prepare_conditioning",
    "sample",
    "save_checkpoint",
    "train",
    "build_bias",
    "caption_spans",
    "coverage_region",
    "sawca",
    "tokenize",
    "tokens_in_region",
    "Caption",
    "MultimodalTriplet",
    "ReferencePlacement",
    "TrajectoryTrack",
    "TripletError",
    "ValidationReport",
    "Violation",
    "emit_triplet",
    "in_frame",
    "parse_triplet",
    "resample_track",
    "validate_triplet",
    "__version__",
]
