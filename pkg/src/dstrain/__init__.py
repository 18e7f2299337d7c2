"""Dempster-Shafer evidence fusion with conflict-weighted loss feedback.

The package fuses detector predictions with ground truth via Dempster's rule,
maps the resulting conflict K to a loss multiplication factor through
configurable scorecards, and demonstrates the four injection strategies
(DIU/AIU x Product/Deep) on a deterministic synthetic detector, with a full
detection-metrics stack and an experiment CLI.
"""

from .errors import (
    AllZeroScoresError,
    DegenerateBoxError,
    DimensionMismatchError,
    DstrainError,
    EmptyEvidenceError,
    EmptyHistoryError,
    EmptyValidationSetError,
    FrameMismatchError,
    InvalidBoxError,
    InvalidConfigError,
    MalformedXmlError,
    MissingFieldError,
    NoClassesError,
    NonPositiveFactorError,
    OutOfRangeError,
    ParseError,
    TotalConflictError,
    UnknownLabelError,
    ValidationError,
)
from .evidence import (
    THETA,
    EvidenceMatrix,
    Frame,
    FusionResult,
    MassFunction,
    belief,
    certainty,
    combine_pair,
    combine_sequential,
    evidence_matrix,
    ignorance_interval,
    mass_from_ground_truth,
    mass_from_softmax,
    normalize_evidence,
    plausibility,
)
from .injection import (
    How,
    InjectionConfig,
    LossBreakdown,
    UncertaintyState,
    Where,
    aiu_factor,
    aiu_mean,
    apply_deep_injection,
    apply_product_injection,
    diu_factor,
    injection_factor,
    record_epoch_uncertainty,
)
from .scorecard import (
    Band,
    ScoreCard,
    constant_card,
    lookup,
    parse_scorecard,
    scorecard_a,
    scorecard_b,
    serialize_scorecard,
)
from .metrics import (
    Box,
    ClassPRF,
    ConfusionMatrix,
    Detection,
    DetectionEvaluation,
    GroundTruth,
    PerformanceScore,
    average_precision,
    class_prf,
    evaluate_detections,
    iou,
    match_detections,
    mean_average_precision,
    micro_prf,
    micro_prf_from_counts,
    performance_score,
)
from .detector import (
    Dataset,
    ExperimentConfig,
    Instance,
    Model,
    Prediction,
    SyntheticDatasetConfig,
    adagrad_step,
    batch_loss_and_grads,
    compute_losses,
    evaluate_test_map,
    forward,
    generate_dataset,
    init_model,
    run_experiment,
    validate_and_measure_uncertainty,
)
from .ingest import (
    Annotation,
    DetectionRecord,
    VocObject,
    class_instance_counts,
    load_detections,
    parse_voc_annotation,
    serialize_detections,
    serialize_voc_annotation,
)
from .report import EpochRow, ExperimentReport

__version__ = "0.1.0"
