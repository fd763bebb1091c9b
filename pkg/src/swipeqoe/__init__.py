"""Swipe-delay QoE toolkit for short-video streaming.

Covers the full loop: generating the controlled stimulus design, predicting
QoE from swipe-delay structure (recency-weighted delay model plus classic
stall/zapping baselines), fitting coefficients to rating data, the
subjective-data pipeline (screening, MOS, confidence intervals, SOS), a
bandwidth-trace playback/preload simulator, and a small rating-collection
service for running a live study.
"""

from .analysis import (
    MetricsReport,
    MosRecord,
    RatingEntry,
    RatingTable,
    ScreeningResult,
    SosFit,
    compute_mos,
    fit_sos,
    metrics_report,
    pcc,
    rmse,
    screen_raters,
    srocc,
)
from .design import (
    DEFAULT_VIDEOS,
    DelayPattern,
    Session,
    StimulusSpec,
    Video,
    build_session,
    generate_design,
    read_design,
    write_design,
)
from .exceptions import SwipeQoeError
from .fitting import (
    EvaluationReport,
    FitConfig,
    SwipeDelayQoEModel,
    evaluate_protocol,
    fit_proposed,
)
from .models import (
    DEFAULT_COEFFICIENTS,
    AlignmentFit,
    BaselineInput,
    BaselineRegistry,
    ModelCoefficients,
    Prediction,
    align,
    load_registry,
    predict_baseline,
    predict_proposed,
    predict_proposed_batch,
)
from .netsim import (
    BandwidthTrace,
    PreloadPolicy,
    SimulationResult,
    SwipeScript,
    score_session,
    simulate_session,
)
from .raters import RaterProfile, make_panel, score_distribution, simulate_ratings

__version__ = "0.1.0"

__all__ = [
    "AlignmentFit",
    "BandwidthTrace",
    "BaselineInput",
    "BaselineRegistry",
    "DEFAULT_COEFFICIENTS",
    "DEFAULT_VIDEOS",
    "DelayPattern",
    "EvaluationReport",
    "FitConfig",
    "MetricsReport",
    "ModelCoefficients",
    "MosRecord",
    "Prediction",
    "PreloadPolicy",
    "RaterProfile",
    "RatingEntry",
    "RatingTable",
    "ScreeningResult",
    "Session",
    "SimulationResult",
    "SosFit",
    "StimulusSpec",
    "SwipeDelayQoEModel",
    "SwipeQoeError",
    "SwipeScript",
    "Video",
    "align",
    "build_session",
    "compute_mos",
    "evaluate_protocol",
    "fit_proposed",
    "fit_sos",
    "generate_design",
    "load_registry",
    "make_panel",
    "metrics_report",
    "pcc",
    "predict_baseline",
    "predict_proposed",
    "predict_proposed_batch",
    "read_design",
    "rmse",
    "score_distribution",
    "score_session",
    "screen_raters",
    "simulate_ratings",
    "simulate_session",
    "srocc",
    "write_design",
]
