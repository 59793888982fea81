"""Self-paced hard-negative mining.

Three pieces cooperate during pretraining:

* a cosine-decayed hard-negative budget k(t) = max(1, floor(delta *
  cos(pi*t / (2*t_max)))) shrinking from the full negative count to one;
* per-anchor resampling that keeps only the k most similar (hardest)
  negatives, ties broken toward the lowest index;
* a binary anchor selection s_i = 1 iff loss_i < 1/k, the closed-form
  minimizer of the selection subproblem, so only sufficiently-learned
  anchors contribute to the update at the current pace.

The training objective adds an L2 weight penalty and the constant pace
reward -(1/k) * sum(s); the constant shifts the value, never the gradient.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import tensor as T
from .errors import ContractViolationError
from .tensor import Tensor


@dataclass
class SimilarityMatrix:
    """Per-anchor cosine similarities split into positive and negative parts."""

    pos: Tensor  # (B,) similarities to each anchor's positive
    neg: Tensor  # (B, N) similarities to the negative pool
    anchor_level: str = ""
    negative_level: str = ""

    @property
    def negatives_per_anchor(self) -> int:
        return self.neg.shape[1]


@dataclass
class SplState:
    """Pace bookkeeping carried across a training run."""

    t: int
    t_max: int
    delta: int
    k_t: int
    selection: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))


def hard_negative_budget(t: int, t_max: int, delta: int) -> int:
    """Cosine-decayed budget, clamped below at 1 so the final steps stay defined."""
    if t_max < 1 or delta < 1:
        raise ContractViolationError("t_max and delta must be >= 1")
    if not 0 <= t <= t_max:
        raise ContractViolationError(f"step {t} outside [0, {t_max}]")
    return max(1, math.floor(delta * math.cos(math.pi * t / (2.0 * t_max))))


def resample_hard_negatives(
    matrix: SimilarityMatrix, k: int
) -> tuple[SimilarityMatrix, np.ndarray]:
    """Keep the k highest-similarity negatives per anchor row.

    Returns the resampled matrix and the kept column indices (B, min(k, N)).
    Kept negatives are ordered by descending similarity with ties broken
    toward the lowest original index. When k >= N the matrix is returned
    unchanged (same tensors, original order).
    """
    if k < 1:
        raise ContractViolationError("hard-negative budget must be >= 1")
    batch, n = matrix.neg.shape
    if k >= n:
        kept = np.tile(np.arange(n), (batch, 1))
        return matrix, kept
    order = np.argsort(-matrix.neg.data, axis=1, kind="stable")[:, :k]
    resampled = SimilarityMatrix(
        pos=matrix.pos,
        neg=T.take_cols(matrix.neg, order),
        anchor_level=matrix.anchor_level,
        negative_level=matrix.negative_level,
    )
    return resampled, order


def select_anchors(per_anchor_losses: np.ndarray, k: int) -> np.ndarray:
    """Binary selection: s_i = 1 iff loss_i < 1/k (strict).

    This is the exact minimizer of sum(s * loss) - (1/k) * sum(s) over
    binary vectors.
    """
    if k < 1:
        raise ContractViolationError("hard-negative budget must be >= 1")
    losses = np.asarray(per_anchor_losses, dtype=np.float64)
    if not np.isfinite(losses).all() or (losses < 0).any():
        raise ContractViolationError("per-anchor losses must be finite and >= 0")
    return (losses < 1.0 / k).astype(np.int64)


def weight_penalty(params: Iterable[Tensor], weight_decay: float) -> Tensor:
    """weight_decay * sum of squared parameter entries, differentiable."""
    total: Tensor | None = None
    for p in params:
        term = T.tensor_sum(T.mul(p, p))
        total = term if total is None else total + term
    if total is None:
        return Tensor(0.0)
    return total * weight_decay


def spl_objective(
    per_anchor_losses: Tensor | Sequence[Tensor],
    selections: np.ndarray | Sequence[np.ndarray],
    k: int,
    params: Iterable[Tensor],
    weight_decay: float,
) -> Tensor:
    """Selected-loss objective: r(w) + sum_i s_i * loss_i - (1/k) * sum_i s_i.

    Accepts one per-anchor loss vector with its selection, or parallel
    sequences covering several level pairs; the weight penalty is counted
    once either way. Gradients flow through the selected losses and the
    weight penalty; the selection and the pace constant do not carry
    gradients.
    """
    if k < 1:
        raise ContractViolationError("hard-negative budget must be >= 1")
    if isinstance(per_anchor_losses, Tensor):
        loss_vectors: Sequence[Tensor] = (per_anchor_losses,)
        selection_vectors: Sequence[np.ndarray] = (np.asarray(selections),)
    else:
        loss_vectors = tuple(per_anchor_losses)
        selection_vectors = tuple(np.asarray(s) for s in selections)
    if len(loss_vectors) != len(selection_vectors):
        raise ContractViolationError("one selection vector per loss vector required")
    objective = weight_penalty(params, weight_decay)
    selected_count = 0.0
    for losses, s in zip(loss_vectors, selection_vectors):
        if s.shape != losses.shape:
            raise ContractViolationError("selection shape does not match losses")
        objective = objective + T.tensor_sum(T.mul(losses, Tensor(s.astype(np.float64))))
        selected_count += float(s.sum())
    return objective + Tensor(-selected_count / k)
