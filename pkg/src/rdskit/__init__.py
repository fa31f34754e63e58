"""rdskit: radial dispersion scoring and evaluation for sampled LLM generations."""

from .baselines import (
    ExtractedAnswer,
    anll,
    extract_answer,
    nll,
    self_consistency,
    self_consistency_per_sample,
)
from .dataio import EmbeddingCache, GenerationSample, PromptRecord, read_records, write_records
from .dispersion import (
    EmbeddingSet,
    ProbabilityWeights,
    ScoreSet,
    avg_pairwise_cosine,
    centroid,
    eigen_embed,
    l2_normalize,
    probs_from_anll,
    rds,
    rds_l2,
    rds_per_sample,
    rds_w_per_sample,
    rds_weighted,
    score_set,
    weighted_centroid,
)
from .evaluation import (
    EvalReport,
    LabeledScore,
    auroc,
    best_of_n_accuracy,
    best_of_n_select,
    label_correct,
    rouge_l_f1,
)
from .simulate import RegimeConfig, generate, sweep

__version__ = "0.1.0"

__all__ = [
    "EmbeddingCache",
    "EmbeddingSet",
    "EvalReport",
    "ExtractedAnswer",
    "GenerationSample",
    "LabeledScore",
    "ProbabilityWeights",
    "PromptRecord",
    "RegimeConfig",
    "ScoreSet",
    "anll",
    "auroc",
    "avg_pairwise_cosine",
    "best_of_n_accuracy",
    "best_of_n_select",
    "centroid",
    "eigen_embed",
    "extract_answer",
    "generate",
    "l2_normalize",
    "label_correct",
    "nll",
    "probs_from_anll",
    "rds",
    "rds_l2",
    "rds_per_sample",
    "rds_w_per_sample",
    "rds_weighted",
    "read_records",
    "rouge_l_f1",
    "score_set",
    "self_consistency",
    "self_consistency_per_sample",
    "sweep",
    "weighted_centroid",
    "write_records",
]
