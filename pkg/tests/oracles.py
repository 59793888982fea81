"""Independent numerical oracles used by the test suite.

Nothing here may call into the autodiff path it is checking: gradients come
from central finite differences, losses from direct high-precision formulas,
selections from exhaustive enumeration.
"""

from __future__ import annotations

import math
from typing import Callable, Sequence

import numpy as np


def finite_difference_gradient(
    f: Callable[[], float], x: np.ndarray, step: float = 1e-5
) -> np.ndarray:
    """Central-difference gradient of scalar f with respect to array x in place."""
    grad = np.zeros_like(x)
    flat = x.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + step
        hi = f()
        flat[i] = orig - step
        lo = f()
        flat[i] = orig
        gflat[i] = (hi - lo) / (2.0 * step)
    return grad


def max_relative_error(analytic: np.ndarray, numeric: np.ndarray,
                       floor: float = 1e-8) -> float:
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return float(np.max(np.abs(analytic - numeric) / denom))


def reference_info_nce(pos_sim: float, neg_sims: Sequence[float], tau: float) -> float:
    """Direct per-anchor softmax contrastive loss via math.* functions."""
    if not neg_sims:
        return 0.0
    return math.log1p(sum(math.exp((n - pos_sim) / tau) for n in neg_sims))


def reference_adam_scalar(x0: float, grad_fn, lr: float, steps: int,
                          beta1: float = 0.9, beta2: float = 0.999,
                          eps: float = 1e-8) -> list[float]:
    """Textbook bias-corrected Adam on a scalar; returns the trajectory."""
    x, m, v = x0, 0.0, 0.0
    trajectory = [x]
    for t in range(1, steps + 1):
        g = grad_fn(x)
        m = beta1 * m + (1 - beta1) * g
        v = beta2 * v + (1 - beta2) * g * g
        m_hat = m / (1 - beta1**t)
        v_hat = v / (1 - beta2**t)
        x -= lr * m_hat / (math.sqrt(v_hat) + eps)
        trajectory.append(x)
    return trajectory


def enumerate_selection(losses: np.ndarray, k: int) -> np.ndarray:
    """Brute-force argmin of sum(s*loss) - (1/k)*sum(s) over binary vectors.

    Ties are broken toward selecting (matches the strict '<' rule only when
    no loss equals exactly 1/k; callers avoid exact ties or accept either).
    """
    n = losses.size
    assert n <= 16
    best_value = math.inf
    best_s = np.zeros(n, dtype=int)
    for mask in range(2**n):
        s = np.array([(mask >> i) & 1 for i in range(n)], dtype=float)
        value = float(np.dot(s, losses) - s.sum() / k)
        if value < best_value - 1e-15:
            best_value = value
            best_s = s.astype(int)
    return best_s


def reference_kappa(confusion: np.ndarray, weighted: bool = False) -> float:
    """Closed-form Cohen's kappa from a confusion matrix (rows = true)."""
    counts = confusion.astype(np.float64)
    n = counts.sum()
    classes = counts.shape[0]
    row = counts.sum(axis=1)
    col = counts.sum(axis=0)
    if weighted:
        idx = np.arange(classes, dtype=np.float64)
        w = (idx[:, None] - idx[None, :]) ** 2
        if classes > 1:
            w = w / (classes - 1) ** 2
        observed = (w * counts / n).sum()
        expected = (w * np.outer(row, col) / (n * n)).sum()
        if expected == 0.0:
            return 1.0
        return 1.0 - observed / expected
    p_o = np.trace(counts) / n
    p_e = float(np.dot(row, col)) / (n * n)
    if p_e == 1.0:
        return 1.0 if p_o == 1.0 else 0.0
    return (p_o - p_e) / (1.0 - p_e)


def silhouette_score(points: np.ndarray, labels: np.ndarray) -> float:
    """Plain O(n^2) mean silhouette over Euclidean distances."""
    n = points.shape[0]
    dists = np.sqrt(((points[:, None, :] - points[None, :, :]) ** 2).sum(axis=2))
    scores = []
    for i in range(n):
        same = labels == labels[i]
        same[i] = False
        if not same.any():
            continue
        a = dists[i][same].mean()
        b = min(
            dists[i][labels == other].mean()
            for other in np.unique(labels)
            if other != labels[i]
        )
        scores.append((b - a) / max(a, b))
    return float(np.mean(scores))
