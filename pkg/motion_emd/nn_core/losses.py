"""
Softmax and label-smoothed cross-entropy.
"""

from typing import Tuple

import numpy as np

from motion_emd.errors import DimensionMismatchError


def softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise softmax with max subtraction"""
    logits = np.asarray(logits, dtype=np.float64)
    shifted = logits - logits.max(axis=-1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=-1, keepdims=True)


def log_softmax(logits: np.ndarray) -> np.ndarray:
    logits = np.asarray(logits, dtype=np.float64)
    shifted = logits - logits.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def smoothed_targets(label: int, n_classes: int, eps: float = 0.1) -> np.ndarray:
    """(1 - eps) * one_hot(label) + eps / K
    :param label: class index in [0, n_classes)
    :param n_classes: K
    :param eps: smoothing in [0, 1)
    """
    if not 0 <= label < n_classes:
        raise ValueError("label {} is outside [0, {})".format(label, n_classes))
    if not 0.0 <= eps < 1.0:
        raise ValueError("eps must lie in [0, 1)")
    off = eps / n_classes
    targets = np.full(n_classes, off)
    targets[label] = 1.0 - off * (n_classes - 1)
    return targets


def smoothed_target_matrix(labels: np.ndarray, n_classes: int, eps: float = 0.1) -> np.ndarray:
    return np.stack([smoothed_targets(int(label), n_classes, eps) for label in labels])


def ce_loss(logits: np.ndarray, targets: np.ndarray) -> Tuple[float, np.ndarray]:
    """Cross-entropy against (smoothed) targets.
    For a batch the loss is averaged over rows and so is the gradient.
    :return: (loss, dloss/dlogits) where the gradient is p - targets
    """
    logits = np.asarray(logits, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    if logits.shape != targets.shape:
        raise DimensionMismatchError("logits {} and targets {} differ in shape".format(
            logits.shape, targets.shape))
    log_p = log_softmax(logits)
    grad = np.exp(log_p) - targets
    if logits.ndim == 1:
        return float(-np.sum(targets * log_p)), grad
    batch = logits.shape[0]
    return float(-np.sum(targets * log_p) / batch), grad / batch
