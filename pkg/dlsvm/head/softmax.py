import numpy as np

from dlsvm.errors import DomainError
from dlsvm.head import HeadOutput, HeadSpec, HeadWeights, backprop_scores, encode_targets, head_scores, log_softmax, softmax_probs

ENCODING = "one-hot"


def softmax_head(weights: HeadWeights, h: np.ndarray, labels: np.ndarray, weight_decay: float = 0.0) -> HeadOutput:
    """
    Mean cross-entropy over the minibatch plus weight_decay * 1/2 ||w||^2.

    Args:
        weights (HeadWeights): Head weights, bias row excluded from the decay.
        h (np.ndarray): Penultimate activations, N x D.
        labels (np.ndarray): One-hot targets, N x K.
        weight_decay (float): L2 cost on the head.

    Returns:
        HeadOutput: Loss, gradients for h and W, and the raw scores.
    """
    if weight_decay < 0:
        raise DomainError(f"weight decay must be non-negative, got {weight_decay}")
    if labels.ndim != 2 or labels.shape[0] != h.shape[0] or labels.shape[1] != weights.num_classes:
        raise DomainError(f"labels {labels.shape} do not fit N={h.shape[0]}, K={weights.num_classes}")
    if not np.all((labels == 0) | (labels == 1)) or not np.all(labels.sum(axis=1) == 1):
        raise DomainError("softmax labels must be one-hot rows")
    n = h.shape[0]
    scores = head_scores(weights, h)
    data_loss = float(-np.sum(labels * log_softmax(scores)) / n)
    d_scores = (softmax_probs(scores) - labels) / n
    d_h, d_W = backprop_scores(weights, h, d_scores, weight_decay)
    loss = data_loss + weight_decay * 0.5 * weights.norm_sq()
    return HeadOutput(loss=loss, data_loss=data_loss, d_h=d_h, d_W=d_W, scores=scores)


def evaluate(weights: HeadWeights, h: np.ndarray, labels: np.ndarray, spec: HeadSpec) -> HeadOutput:
    targets = encode_targets(labels, spec.num_classes, ENCODING, dtype=h.dtype)
    return softmax_head(weights, h, targets, spec.weight_decay)
