"""Linear-probe training on encoder features and grading metrics.

The probe is a single linear layer over backbone features (projection head
discarded). In frozen mode features are computed once and only the head
trains; in finetune mode gradients flow through the whole encoder. Metrics
follow the grading convention: accuracy plus Cohen's kappa in both plain and
quadratic-weighted forms.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .encoder import Encoder, _he_uniform
from .errors import ContractViolationError
from .optim import adam_step, init_adam
from .patches import Patch
from .seeding import STREAM_PROBE, rng_for
from .tensor import Tensor


@dataclass
class MetricsReport:
    accuracy: float
    kappa: float
    quadratic_weighted_kappa: float
    confusion: np.ndarray  # (C, C) ints, rows = true class
    per_class_counts: list[int]

    def to_json(self) -> str:
        return json.dumps(
            {
                "accuracy": self.accuracy,
                "kappa": self.kappa,
                "quadratic_weighted_kappa": self.quadratic_weighted_kappa,
                "per_class_counts": self.per_class_counts,
                "confusion": self.confusion.tolist(),
            },
            indent=2,
        )

    @staticmethod
    def csv_header() -> str:
        return "accuracy,kappa,quadratic_weighted_kappa,n_eval"

    def csv_row(self) -> str:
        return (
            f"{self.accuracy!r},{self.kappa!r},{self.quadratic_weighted_kappa!r},"
            f"{int(self.confusion.sum())}"
        )


def confusion_matrix(y_true: np.ndarray, y_pred: np.ndarray, num_classes: int) -> np.ndarray:
    counts = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(counts, (np.asarray(y_true, dtype=int), np.asarray(y_pred, dtype=int)), 1)
    return counts


def accuracy_from_confusion(confusion: np.ndarray) -> float:
    return float(np.trace(confusion)) / float(confusion.sum())


def cohen_kappa(confusion: np.ndarray, weighted: bool = False) -> float:
    """Chance-corrected agreement; quadratic weighting when ``weighted``."""
    counts = confusion.astype(np.float64)
    n = float(counts.sum())
    if n == 0:
        raise ContractViolationError("empty confusion matrix")
    classes = counts.shape[0]
    row = counts.sum(axis=1)
    col = counts.sum(axis=0)
    if weighted:
        idx = np.arange(classes, dtype=np.float64)
        weights = (idx[:, None] - idx[None, :]) ** 2
        if classes > 1:
            weights /= (classes - 1) ** 2
        observed = float((weights * counts).sum()) / n
        expected = float((weights * np.outer(row, col)).sum()) / (n * n)
        if expected == 0.0:
            return 1.0
        return 1.0 - observed / expected
    p_observed = float(np.trace(counts)) / n
    p_expected = float(row @ col) / (n * n)
    if p_expected == 1.0:
        return 1.0 if p_observed == 1.0 else 0.0
    return (p_observed - p_expected) / (1.0 - p_expected)


def report_from_predictions(y_true: np.ndarray, y_pred: np.ndarray,
                            num_classes: int) -> MetricsReport:
    confusion = confusion_matrix(y_true, y_pred, num_classes)
    return MetricsReport(
        accuracy=accuracy_from_confusion(confusion),
        kappa=cohen_kappa(confusion),
        quadratic_weighted_kappa=cohen_kappa(confusion, weighted=True),
        confusion=confusion,
        per_class_counts=confusion.sum(axis=1).astype(int).tolist(),
    )


# -- probe --------------------------------------------------------------------


@dataclass
class LinearProbe:
    weight: Tensor  # (embedding_dim, num_classes)
    bias: Tensor  # (num_classes,)
    num_classes: int


def _cross_entropy(logits: Tensor, labels: np.ndarray) -> Tensor:
    lse = T.row_logsumexp(logits)
    true_logit = T.reshape(T.take_cols(logits, labels[:, None].astype(int)), (labels.size,))
    return T.mean(lse - true_logit)


def patch_arrays(patches: list[Patch]) -> tuple[np.ndarray, np.ndarray]:
    """Stack patch pixels and grade labels into training arrays."""
    pixels = np.stack([p.pixels for p in patches])
    labels = np.array([p.grade for p in patches], dtype=np.int64)
    return pixels, labels


def train_probe(
    encoder: Encoder,
    patches: list[Patch],
    mode: str,
    epochs: int,
    lr: float,
    seed: int,
    num_classes: int = 3,
) -> LinearProbe:
    """Cross-entropy training of a linear head; finetune also updates the encoder.

    Both modes first fit the head on frozen features for ``epochs`` full-batch
    steps (at 10x lr in finetune mode). Finetune mode then trains head and
    encoder jointly for another ``epochs`` steps: warming the head up first
    prevents a randomly initialized head from wrecking the pretrained
    backbone with large early gradients.
    """
    if mode not in ("frozen", "finetune"):
        raise ContractViolationError(f"unknown probe mode '{mode}'")
    pixels, labels = patch_arrays(patches)
    if labels.max(initial=0) >= num_classes or labels.min(initial=0) < 0:
        raise ContractViolationError("labels outside [0, num_classes)")
    if np.unique(labels).size < 2:
        raise ContractViolationError("probe training needs at least two classes")
    rng = rng_for(STREAM_PROBE, seed)
    emb = encoder.config.embedding_dim
    probe = LinearProbe(
        weight=Tensor(_he_uniform(rng, (emb, num_classes), fan_in=emb), requires_grad=True),
        bias=Tensor(np.zeros(num_classes), requires_grad=True),
        num_classes=num_classes,
    )
    head_params = {"probe.weight": probe.weight, "probe.bias": probe.bias}

    with T.no_grad():
        features_const = encoder.encode(pixels).data
    head_lr = lr if mode == "frozen" else 10.0 * lr
    state = init_adam(head_params, lr=head_lr)
    for _ in range(epochs):
        logits = T.matmul(Tensor(features_const), probe.weight) + probe.bias
        loss = _cross_entropy(logits, labels)
        grads = T.forward_backward(loss, list(head_params.values()))
        adam_step(head_params, dict(zip(head_params.keys(), grads)), state)
    if mode == "frozen":
        return probe

    joint_params = {**encoder.parameters(), **head_params}
    state = init_adam(joint_params, lr=lr)
    for _ in range(epochs):
        logits = T.matmul(encoder.encode(pixels), probe.weight) + probe.bias
        loss = _cross_entropy(logits, labels)
        grads = T.forward_backward(loss, list(joint_params.values()))
        adam_step(joint_params, dict(zip(joint_params.keys(), grads)), state)
    return probe


def predict(encoder: Encoder, probe: LinearProbe, patches: list[Patch]) -> np.ndarray:
    pixels, _ = patch_arrays(patches)
    with T.no_grad():
        features = encoder.encode(pixels)
        logits = T.matmul(features, probe.weight) + probe.bias
    return logits.data.argmax(axis=1)


def evaluate(encoder: Encoder, probe: LinearProbe, patches: list[Patch]) -> MetricsReport:
    if not patches:
        raise ContractViolationError("evaluation set must be nonempty")
    _, labels = patch_arrays(patches)
    predictions = predict(encoder, probe, patches)
    return report_from_predictions(labels, predictions, probe.num_classes)
