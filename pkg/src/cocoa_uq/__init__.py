"""Uncertainty estimators for LLM generations, with rejection-curve
evaluation over serialized generation records."""

from .errors import CocoaError, ConfigError, DataError, ProviderError, UndefinedPRRError
from .estimators import ESTIMATOR_IDS, EstimatorResult, score_record
from .evaluation import PRRReport, ScoredInstance, prr, rejection_curve
from .records import (
    GenerationRecord,
    Sequence,
    TargetStrategy,
    TokenObservation,
    load_records,
    select_target,
    seq_log_prob,
)
from .similarity import SimilaritySource, build_matrix, jaccard, rouge_l, target_row

__version__ = "0.1.0"

__all__ = [
    "CocoaError",
    "ConfigError",
    "DataError",
    "ProviderError",
    "UndefinedPRRError",
    "ESTIMATOR_IDS",
    "EstimatorResult",
    "score_record",
    "PRRReport",
    "ScoredInstance",
    "prr",
    "rejection_curve",
    "GenerationRecord",
    "Sequence",
    "TargetStrategy",
    "TokenObservation",
    "load_records",
    "select_target",
    "seq_log_prob",
    "SimilaritySource",
    "build_matrix",
    "jaccard",
    "rouge_l",
    "target_row",
    "__version__",
]
