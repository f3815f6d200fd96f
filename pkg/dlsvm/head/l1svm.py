"""
One-vs-rest L1-SVM: 1/2 ||w||^2 + C * sum of hinge losses over the minibatch
and all K machines. Not differentiable at margin 1; the indicator picks 0 there.
"""

import numpy as np

from dlsvm.errors import DomainError
from dlsvm.head import HeadOutput, HeadSpec, HeadWeights, backprop_scores, check_sign_targets, encode_targets, head_scores

ENCODING = "sign"


def l1svm_head(weights: HeadWeights, h: np.ndarray, targets: np.ndarray, C: float) -> HeadOutput:
    if C <= 0:
        raise DomainError(f"SVM penalty C must be positive, got {C}")
    check_sign_targets(targets)
    scores = head_scores(weights, h)
    margins = scores * targets
    data_loss = float(C * np.sum(np.maximum(1 - margins, 0)))
    d_scores = -C * targets * (margins < 1)
    d_h, d_W = backprop_scores(weights, h, d_scores, 1.0)
    loss = 0.5 * weights.norm_sq() + data_loss
    return HeadOutput(loss=loss, data_loss=data_loss, d_h=d_h, d_W=d_W, scores=scores)


def evaluate(weights: HeadWeights, h: np.ndarray, labels: np.ndarray, spec: HeadSpec) -> HeadOutput:
    targets = encode_targets(labels, spec.num_classes, ENCODING, dtype=h.dtype)
    return l1svm_head(weights, h, targets, spec.C)
