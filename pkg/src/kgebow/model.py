"""Linear bag-of-words classifier: embedding lookup, losses and SGD steps.

The model is a lookup matrix over input tokens and a linear classifier over
output classes.  Input token rows are averaged into a single hidden vector,
classes are scored by dot product, and training minimizes either the full
softmax cross-entropy or a one-versus-all logistic loss where only the true
class and k sampled negative classes are updated:

    L = -log(sigmoid(s_label)) - sum_neg log(sigmoid(-s_neg))

Production training runs in float32 (see ``kgebow.train``); these reference
operations work on whatever dtype the model carries, so a float64 model
doubles as the high-precision path for gradient checks.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np
from scipy.special import expit, log_expit

from kgebow.data import Example

SOFTMAX = "softmax"
NEGATIVE_SAMPLING = "ns"


@dataclass
class EmbeddingModel:
    """Input lookup matrix and output classifier matrix of equal width."""

    input_matrix: np.ndarray
    output_matrix: np.ndarray
    seed: int

    def __post_init__(self):
        if self.input_matrix.ndim != 2 or self.output_matrix.ndim != 2:
            raise ValueError("model matrices must be 2-dimensional")
        if self.input_matrix.shape[1] != self.output_matrix.shape[1]:
            raise ValueError(
                "input and output matrices must share the embedding dimension"
            )
        if self.dim < 1:
            raise ValueError("embedding dimension must be >= 1")

    @property
    def input_vocab_size(self) -> int:
        return self.input_matrix.shape[0]

    @property
    def output_class_count(self) -> int:
        return self.output_matrix.shape[0]

    @property
    def dim(self) -> int:
        return self.input_matrix.shape[1]


@dataclass(frozen=True)
class LossConfig:
    """Which loss to train with; ``negatives`` is only used by ``ns``."""

    kind: Literal["softmax", "ns"] = SOFTMAX
    negatives: int = 5

    def __post_init__(self):
        if self.kind not in (SOFTMAX, NEGATIVE_SAMPLING):
            raise ValueError(f"unknown loss kind: {self.kind!r}")
        if self.kind == NEGATIVE_SAMPLING and self.negatives < 1:
            raise ValueError("negative sampling needs at least one negative")


def init_model(
    input_vocab_size: int,
    output_class_count: int,
    dim: int,
    seed: int,
    dtype=np.float32,
) -> EmbeddingModel:
    """Fresh model: input rows uniform on [-1/dim, 1/dim], output rows zero."""
    if input_vocab_size < 1 or output_class_count < 1 or dim < 1:
        raise ValueError(
            "input_vocab_size, output_class_count and dim must all be >= 1"
        )
    rng = np.random.default_rng(seed)
    bound = 1.0 / dim
    input_matrix = rng.uniform(
        -bound, bound, size=(input_vocab_size, dim)
    ).astype(dtype)
    output_matrix = np.zeros((output_class_count, dim), dtype=dtype)
    return EmbeddingModel(input_matrix, output_matrix, seed)


def _token_ids(input_tokens: Sequence[int], model: EmbeddingModel) -> np.ndarray:
    ids = np.asarray(input_tokens, dtype=np.int64)
    if ids.size == 0:
        raise ValueError("input token list must be non-empty")
    if ids.min() < 0 or ids.max() >= model.input_vocab_size:
        raise IndexError("input token id out of range")
    return ids


def average_input(input_tokens: Sequence[int], model: EmbeddingModel) -> np.ndarray:
    """Mean of the input rows at the given ids; duplicates count multiply."""
    ids = _token_ids(input_tokens, model)
    return model.input_matrix[ids].sum(axis=0) / ids.size


def score_all(hidden: np.ndarray, model: EmbeddingModel) -> np.ndarray:
    """Dot product of every output row with the hidden vector."""
    hidden = np.asarray(hidden)
    if hidden.shape != (model.dim,):
        raise ValueError(
            f"hidden vector has shape {hidden.shape}, expected ({model.dim},)"
        )
    return model.output_matrix @ hidden


def softmax_probs(scores: np.ndarray) -> np.ndarray:
    """Max-shifted softmax; preserves argmax and is shift invariant."""
    scores = np.asarray(scores)
    if scores.size == 0:
        raise ValueError("cannot take softmax of an empty score vector")
    shifted = scores - scores.max()
    exps = np.exp(shifted)
    return exps / exps.sum()


def softmax_loss(example: Example, model: EmbeddingModel) -> float:
    """Cross-entropy -log p(label) without touching the parameters."""
    hidden = average_input(example.input_tokens, model)
    scores = score_all(hidden, model)
    shifted = scores - scores.max()
    return float(np.log(np.exp(shifted).sum()) - shifted[example.label])


def softmax_step(example: Example, model: EmbeddingModel, lr: float) -> float:
    """One SGD step on the softmax loss; returns the pre-update loss."""
    if lr <= 0:
        raise ValueError("learning rate must be positive")
    _check_label(example, model)
    ids = _token_ids(example.input_tokens, model)
    hidden = model.input_matrix[ids].sum(axis=0) / ids.size
    scores = model.output_matrix @ hidden
    shifted = scores - scores.max()
    exps = np.exp(shifted)
    z = exps.sum()
    loss = float(np.log(z) - shifted[example.label])
    coef = exps / z  # dL/ds
    coef[example.label] -= 1.0
    grad_hidden = model.output_matrix.T @ coef
    model.output_matrix -= lr * np.outer(coef, hidden)
    np.add.at(model.input_matrix, ids, -(lr / ids.size) * grad_hidden)
    return loss


def draw_negatives(
    rng: np.random.Generator, output_class_count: int, label: int, k: int
) -> np.ndarray:
    """k class ids drawn uniformly (with replacement) excluding the label."""
    if k >= output_class_count:
        raise ValueError("need fewer negatives than output classes")
    draws = rng.integers(0, output_class_count - 1, size=k)
    return np.where(draws >= label, draws + 1, draws)


def one_vs_all_loss(
    example: Example, model: EmbeddingModel, negatives: np.ndarray
) -> float:
    """Binary logistic loss over the label and the given negative classes."""
    hidden = average_input(example.input_tokens, model)
    s_label = float(model.output_matrix[example.label] @ hidden)
    s_neg = model.output_matrix[np.asarray(negatives)] @ hidden
    return float(-log_expit(s_label) - log_expit(-s_neg).sum())


def one_vs_all_step(
    example: Example,
    model: EmbeddingModel,
    lr: float,
    negatives: np.ndarray,
) -> float:
    """One SGD step on the one-versus-all loss with fixed negative draws.

    All gradients are taken at the current parameters (scores are computed
    for every touched class before any row is written), so the applied
    update is the exact gradient of the returned loss.
    """
    if lr <= 0:
        raise ValueError("learning rate must be positive")
    _check_label(example, model)
    ids = _token_ids(example.input_tokens, model)
    hidden = model.input_matrix[ids].sum(axis=0) / ids.size
    classes = np.concatenate(
        ([example.label], np.asarray(negatives, dtype=np.int64))
    )
    targets = np.zeros(classes.size, dtype=model.input_matrix.dtype)
    targets[0] = 1.0
    rows = model.output_matrix[classes]
    scores = rows @ hidden
    # -log sigma(s) for the label, -log sigma(-s) for negatives
    signs = 2.0 * targets - 1.0
    loss = float(-log_expit(signs * scores).sum())
    coef = expit(scores) - targets  # dL/ds per touched class
    grad_hidden = rows.T @ coef
    np.add.at(model.output_matrix, classes, -lr * np.outer(coef, hidden))
    np.add.at(model.input_matrix, ids, -(lr / ids.size) * grad_hidden)
    return loss


def negative_sampling_step(
    example: Example,
    model: EmbeddingModel,
    lr: float,
    config: LossConfig,
    rng: np.random.Generator,
) -> float:
    """Draw k negatives and apply one one-versus-all SGD step."""
    if config.kind != NEGATIVE_SAMPLING:
        raise ValueError("negative_sampling_step needs an ns loss config")
    _check_label(example, model)
    negatives = draw_negatives(
        rng, model.output_class_count, example.label, config.negatives
    )
    return one_vs_all_step(example, model, lr, negatives)


def _check_label(example: Example, model: EmbeddingModel) -> None:
    if not 0 <= example.label < model.output_class_count:
        raise IndexError(f"label {example.label} out of range")
