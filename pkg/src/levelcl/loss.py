"""Softmax contrastive loss over one positive and a shared negative set,
combined across the three designated level pairs.

Per anchor i with positive p_i and negatives {n_k}, all unit rows:

    loss_i = -log( exp(cos(a_i, p_i)/tau)
                   / (exp(cos(a_i, p_i)/tau) + sum_k exp(cos(a_i, n_k)/tau)) )

Evaluation goes through a max-shifted log-sum-exp; at tau = 0.07 the raw
logits reach +/- 14.3 and the naive form would overflow long before that
matters. With zero negatives the numerator equals the denominator and the
loss is exactly zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .errors import ContractViolationError
from .tensor import Tensor

# the three trained level pairs, (anchor level, negative level)
PAIR_NAMES = (
    "lesion_high|lesion_low",
    "lesion_high|healthy_high",
    "lesion_low|healthy_low",
)


def _check_unit_rows(name: str, t: Tensor, atol: float = 1e-6) -> None:
    norms = np.linalg.norm(t.data, axis=1)
    if t.shape[0] and not np.allclose(norms, 1.0, atol=atol):
        raise ContractViolationError(f"{name} rows must be unit-norm")


@dataclass
class PairLossInput:
    """Row-aligned anchors and positives plus a shared negative pool."""

    anchors: Tensor  # (B, d) unit rows
    positives: Tensor  # (B, d) unit rows, positives[i] pairs with anchors[i]
    negatives: Tensor  # (N, d) unit rows, N >= 0
    temperature: float

    def __post_init__(self):
        if self.temperature <= 0:
            raise ContractViolationError("temperature must be positive")
        if self.anchors.ndim != 2 or self.anchors.shape[0] < 1:
            raise ContractViolationError("anchors must be a nonempty (B, d) matrix")
        if self.positives.shape != self.anchors.shape:
            raise ContractViolationError("positives must align row-for-row with anchors")
        if self.negatives.ndim != 2 or self.negatives.shape[1] != self.anchors.shape[1]:
            raise ContractViolationError("negatives must share the embedding dimension")
        _check_unit_rows("anchors", self.anchors)
        _check_unit_rows("positives", self.positives)
        _check_unit_rows("negatives", self.negatives)


def row_dot(a: Tensor, b: Tensor) -> Tensor:
    """Per-row dot product of two row-aligned matrices -> (B,) vector."""
    return T.tensor_sum(T.mul(a, b), axis=1)


def info_nce(pos_sim: Tensor, neg_sim: Tensor, temperature: float) -> tuple[Tensor, Tensor]:
    """Per-anchor losses and their mean from raw cosine similarities.

    pos_sim: (B,) similarity to each anchor's positive.
    neg_sim: (B, N) similarities to the negatives; N may be zero.
    """
    if temperature <= 0:
        raise ContractViolationError("temperature must be positive")
    batch = pos_sim.shape[0]
    inv_tau = 1.0 / temperature
    pos_logit = pos_sim * inv_tau
    if neg_sim.shape[1] == 0:
        per_anchor = pos_logit - pos_logit  # exactly zero, keeps the graph alive
        return per_anchor, T.mean(per_anchor)
    neg_logit = neg_sim * inv_tau
    # stable log-sum-exp over [positive | negatives] per row; the shift is a
    # constant whose gradient contribution cancels
    shift = np.maximum(pos_logit.data, neg_logit.data.max(axis=1))
    pos_exp = T.exp(pos_logit - Tensor(shift))
    neg_exp_sum = T.tensor_sum(T.exp(neg_logit - Tensor(shift[:, None])), axis=1)
    lse = T.log(pos_exp + neg_exp_sum) + Tensor(shift)
    per_anchor = lse - pos_logit
    return per_anchor, T.mean(per_anchor)


def pairwise_contrastive_loss(inp: PairLossInput) -> tuple[Tensor, Tensor]:
    """(per-anchor losses, mean loss) for one (anchor level, negative level) pair."""
    pos = row_dot(inp.anchors, inp.positives)
    neg = T.matmul(inp.anchors, T.transpose(inp.negatives))
    return info_nce(pos, neg, inp.temperature)


@dataclass
class MultilevelLoss:
    total: Tensor  # sum of the three pair mean losses
    per_anchor: dict[str, Tensor]  # pair name -> (B,) losses
    pair_means: dict[str, Tensor]


def multilevel_loss(
    lesion_high: Tensor,
    lesion_high_aug: Tensor,
    lesion_low: Tensor,
    lesion_low_aug: Tensor,
    healthy_high: Tensor,
    healthy_low: Tensor,
    temperature: float,
) -> MultilevelLoss:
    """Combine the three level-pair losses with unit weights.

    Pairs: high-quality lesions against low-quality lesions, high-quality
    lesions against high-quality healthy, and low-quality lesions against
    low-quality healthy. Anchors always pair with their own augmented view.
    """
    pairs = {
        PAIR_NAMES[0]: (lesion_high, lesion_high_aug, lesion_low),
        PAIR_NAMES[1]: (lesion_high, lesion_high_aug, healthy_high),
        PAIR_NAMES[2]: (lesion_low, lesion_low_aug, healthy_low),
    }
    per_anchor: dict[str, Tensor] = {}
    pair_means: dict[str, Tensor] = {}
    total: Tensor | None = None
    for name, (anchors, positives, negatives) in pairs.items():
        if anchors.shape[0] < 1 or negatives.shape[0] < 1:
            raise ContractViolationError(f"pair {name}: empty batch")
        losses, mean_loss = pairwise_contrastive_loss(
            PairLossInput(anchors, positives, negatives, temperature)
        )
        per_anchor[name] = losses
        pair_means[name] = mean_loss
        total = mean_loss if total is None else total + mean_loss
    assert total is not None
    return MultilevelLoss(total=total, per_anchor=per_anchor, pair_means=pair_means)
