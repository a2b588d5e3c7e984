"""Pairwise learning-to-rank engine for picking the best headline of a news cluster."""

from .data import (
    DrawPolicy,
    EmbeddingFormatError,
    EmbeddingStore,
    Label,
    PairDataset,
    PairRecord,
    PairsFormatError,
    TrainingPairSet,
    build_training_pairs,
    load_embeddings,
    load_pairs,
    split_validation,
    write_embeddings,
)
from .ensemble import (
    BlendSpec,
    Normalization,
    PairScores,
    Prediction,
    PredictionsFormatError,
    blend_pair,
    blend_ranks,
    decide_label,
    normalize_scores,
    predict_dataset,
    read_predictions,
    write_predictions,
)
from .evaluation import (
    ErrorCase,
    EvaluationReport,
    MetricUndefinedError,
    WEIGHT_MATRIX,
    confusion,
    error_report,
    evaluate,
    format_report,
    pair_weight,
    weighted_accuracy,
)
from .pooling import (
    PoolingMethod,
    TokenEmbeddingSequence,
    TokenFile,
    TokenFileFormatError,
    first_token_pool,
    mean_pool,
    pool_file,
    pool_sequences,
    read_token_file,
    write_token_file,
)
from .ranker import (
    HyperParams,
    ModelFormatError,
    RankerModel,
    TrainingSummary,
    load_model,
    pair_logit_gradients,
    pair_logit_loss,
    save_model,
    train,
)

__version__ = "0.1.0"

__all__ = [
    "BlendSpec",
    "DrawPolicy",
    "EmbeddingFormatError",
    "EmbeddingStore",
    "ErrorCase",
    "EvaluationReport",
    "HyperParams",
    "Label",
    "MetricUndefinedError",
    "ModelFormatError",
    "Normalization",
    "PairDataset",
    "PairRecord",
    "PairScores",
    "PairsFormatError",
    "PoolingMethod",
    "Prediction",
    "PredictionsFormatError",
    "RankerModel",
    "TokenEmbeddingSequence",
    "TokenFile",
    "TokenFileFormatError",
    "TrainingPairSet",
    "TrainingSummary",
    "WEIGHT_MATRIX",
    "blend_pair",
    "blend_ranks",
    "build_training_pairs",
    "confusion",
    "decide_label",
    "error_report",
    "evaluate",
    "first_token_pool",
    "format_report",
    "load_embeddings",
    "load_model",
    "load_pairs",
    "mean_pool",
    "normalize_scores",
    "pair_logit_gradients",
    "pair_logit_loss",
    "pair_weight",
    "pool_file",
    "pool_sequences",
    "predict_dataset",
    "read_predictions",
    "read_token_file",
    "save_model",
    "split_validation",
    "train",
    "weighted_accuracy",
    "write_embeddings",
    "write_predictions",
    "write_token_file",
]
