"""Budget argument mining toolkit.

Classifies monetary expressions in political-meeting minutes into seven
argument classes (rule gate + learned models) and links each expression
to the budget item it argues about (pair classifier + cosine rerank).
"""

from .corpus import (
    ALL_CLASSES,
    ArgumentClass,
    BudgetItem,
    Corpus,
    Level1,
    MonetaryExpression,
    Source,
    Utterance,
    class_histogram,
    load_budget,
    load_minutes,
    parse_class,
)
from .cascade import AcModel, AcStrategy, balance_resample, classify, train_ac
from .errors import BamkitError, DataError
from .evalkit import cross_validate, evaluate_ac, evaluate_labels, task_score
from .gate import Gate, GateDecision, GateRule, gate_stats
from .rid import RidModel, cosine, detect_relation, train_rid
from .segment import Proposition, segment, split_sentences
from .textclf import (
    EmbeddingVector,
    FeatureVector,
    FeaturizerConfig,
    Hyperparams,
    LinearModel,
    featurize,
    load_embeddings,
    predict_proba,
    train,
)

__version__ = "0.1.0"

__all__ = [
    "ALL_CLASSES",
    "AcModel",
    "AcStrategy",
    "ArgumentClass",
    "BamkitError",
    "BudgetItem",
    "Corpus",
    "DataError",
    "EmbeddingVector",
    "FeatureVector",
    "FeaturizerConfig",
    "Gate",
    "GateDecision",
    "GateRule",
    "Hyperparams",
    "Level1",
    "LinearModel",
    "MonetaryExpression",
    "Proposition",
    "RidModel",
    "Source",
    "Utterance",
    "__version__",
    "balance_resample",
    "class_histogram",
    "classify",
    "cosine",
    "cross_validate",
    "detect_relation",
    "evaluate_ac",
    "evaluate_labels",
    "featurize",
    "gate_stats",
    "load_budget",
    "load_embeddings",
    "load_minutes",
    "parse_class",
    "predict_proba",
    "segment",
    "split_sentences",
    "task_score",
    "train",
    "train_ac",
    "train_rid",
]
