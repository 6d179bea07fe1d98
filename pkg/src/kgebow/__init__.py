"""Bag-of-words linear classifiers for KB completion and KB question answering."""

from kgebow.data import Example, QAPair, TripleStore, Vocab
from kgebow.model import (
    NEGATIVE_SAMPLING,
    SOFTMAX,
    EmbeddingModel,
    LossConfig,
    average_input,
    init_model,
    negative_sampling_step,
    score_all,
    softmax_probs,
    softmax_step,
)
from kgebow.report import EvalReport, RunManifest
from kgebow.train import TrainConfig, TrainStats, learning_rate_at, train

__version__ = "0.1.0"

__all__ = [
    "Example",
    "QAPair",
    "TripleStore",
    "Vocab",
    "EmbeddingModel",
    "LossConfig",
    "SOFTMAX",
    "NEGATIVE_SAMPLING",
    "init_model",
    "average_input",
    "score_all",
    "softmax_probs",
    "softmax_step",
    "negative_sampling_step",
    "EvalReport",
    "RunManifest",
    "TrainConfig",
    "TrainStats",
    "learning_rate_at",
    "train",
    "__version__",
]
