"""Softmax and frame-averaged cross entropy."""

from __future__ import annotations

import numpy as np


def softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise softmax, stabilized by max subtraction."""
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_ce(logits: np.ndarray, labels: np.ndarray):
    """Mean cross entropy over frames.

    logits: (T, C); labels: (T,) integer class ids. Returns (loss, posteriors).
    """
    logits = np.atleast_2d(np.asarray(logits, dtype=np.float64))
    labels = np.asarray(labels, dtype=np.int64).ravel()
    t_len, n_classes = logits.shape
    if labels.shape[0] != t_len:
        raise ValueError(f"{labels.shape[0]} labels for {t_len} frames")
    if labels.size and (labels.min() < 0 or labels.max() >= n_classes):
        raise ValueError(f"labels must lie in [0, {n_classes})")
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1))
    log_post = shifted - log_norm[:, None]
    loss = -log_post[np.arange(t_len), labels].mean()
    return loss, np.exp(log_post)


def softmax_ce_backward(posteriors: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Gradient of the mean-over-frames CE w.r.t. the logits."""
    labels = np.asarray(labels, dtype=np.int64).ravel()
    t_len = posteriors.shape[0]
    grad = posteriors.copy()
    grad[np.arange(t_len), labels] -= 1.0
    return grad / t_len
