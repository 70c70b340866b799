from .ablation import AblationConfig, AblationTable, run_ablation
from .benchmark import BenchmarkSample, BenchmarkTask, EvalReport, run_benchmark
from .metrics import (
    MetricScore,
    RougeVariant,
    attribute_accuracy,
    corpus_bleu,
    lcs_length,
    rouge,
    rouge_l,
    rouge_n,
    sentence_bleu,
    sim,
)
from .quality import (
    FEATURE_NAMES,
    QualityFeatureVector,
    QualityWeights,
    WeightMismatchError,
    display_score,
    listing_features,
    quality_score,
    record_features,
    record_quality_scorer,
)

__all__ = [
    "AblationConfig",
    "AblationTable",
    "BenchmarkSample",
    "BenchmarkTask",
    "EvalReport",
    "FEATURE_NAMES",
    "MetricScore",
    "QualityFeatureVector",
    "QualityWeights",
    "RougeVariant",
    "WeightMismatchError",
    "attribute_accuracy",
    "corpus_bleu",
    "display_score",
    "lcs_length",
    "listing_features",
    "quality_score",
    "record_features",
    "record_quality_scorer",
    "rouge",
    "rouge_l",
    "rouge_n",
    "run_ablation",
    "run_benchmark",
    "sentence_bleu",
    "sim",
]
