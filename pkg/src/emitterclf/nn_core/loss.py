"""Class weighting and the weighted cross-entropy training loss."""

from __future__ import annotations

import numpy as np

__all__ = ["median_frequency_weights", "weighted_cross_entropy"]

_LOG_FLOOR = 1e-12


def median_frequency_weights(class_counts) -> np.ndarray:
    """Median frequency balancing: w_c = median_c(freq_c) / freq_c.

    freq_c = N_c / N. The median of an even number of classes is the mean of
    the two central values. All classes must be populated.
    """
    counts = np.asarray(class_counts, dtype=np.float64)
    if counts.ndim != 1 or counts.size == 0:
        raise ValueError("class_counts must be a non-empty 1-d array")
    if np.any(counts <= 0):
        empty = int(np.argmax(counts <= 0))
        raise ValueError(f"class {empty} has no training sequences")
    freqs = counts / counts.sum()
    return np.median(freqs) / freqs


def weighted_cross_entropy(
    probs: np.ndarray, labels: np.ndarray, weights: np.ndarray
) -> tuple[float, np.ndarray]:
    """Weighted cross-entropy over a batch of softmax outputs.

    loss = -(1/W) * sum_i w_{y_i} * log(p_{i, y_i}),  W = sum_i w_{y_i}

    Returns (loss, gradient w.r.t. the pre-softmax logits): the fused
    softmax + cross-entropy gradient (w_{y_i}/W) * (p_i - onehot(y_i)) per
    sample. The log is floored at 1e-12.
    """
    n = len(labels)
    rows = np.arange(n)
    w = weights[labels]
    w_sum = w.sum()
    p_true = probs[rows, labels]
    loss = float(-(w * np.log(np.maximum(p_true, _LOG_FLOOR))).sum() / w_sum)
    dlogits = probs * (w / w_sum)[:, None]
    dlogits[rows, labels] -= w / w_sum
    return loss, dlogits
