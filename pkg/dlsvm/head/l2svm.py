"""
One-vs-rest L2-SVM (squared hinge). Smooth everywhere, including margin 1.
"""

import numpy as np

from dlsvm.errors import DomainError
from dlsvm.head import HeadOutput, HeadSpec, HeadWeights, backprop_scores, check_sign_targets, encode_targets, head_scores

ENCODING = "sign"


def l2svm_head(weights: HeadWeights, h: np.ndarray, targets: np.ndarray, C: float) -> HeadOutput:
    """
    Args:
        weights (HeadWeights): Head weights; the bias row is not regularised.
        h (np.ndarray): Penultimate activations, N x D.
        targets (np.ndarray): Sign targets, N x K.
        C (float): Weight of the summed squared hinge.

    Returns:
        HeadOutput: 1/2 ||w||^2 + C * sum max(1 - s*t, 0)^2 with its gradients.
    """
    if C <= 0:
        raise DomainError(f"SVM penalty C must be positive, got {C}")
    check_sign_targets(targets)
    scores = head_scores(weights, h)
    violation = np.maximum(1 - scores * targets, 0)
    data_loss = float(C * np.sum(violation * violation))
    d_scores = -2 * C * targets * violation
    d_h, d_W = backprop_scores(weights, h, d_scores, 1.0)
    loss = 0.5 * weights.norm_sq() + data_loss
    return HeadOutput(loss=loss, data_loss=data_loss, d_h=d_h, d_W=d_W, scores=scores)


def evaluate(weights: HeadWeights, h: np.ndarray, labels: np.ndarray, spec: HeadSpec) -> HeadOutput:
    targets = encode_targets(labels, spec.num_classes, ENCODING, dtype=h.dtype)
    return l2svm_head(weights, h, targets, spec.C)
