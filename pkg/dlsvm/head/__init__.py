"""
This folder contains the output objectives.
Each module is named after a head kind and must define
ENCODING ("one-hot" or "sign") and
evaluate(weights: HeadWeights, h, labels, spec: HeadSpec) -> HeadOutput.
Shared pieces (scores, probabilities, prediction, target encoding) live here.
"""

import importlib
from dataclasses import dataclass
from enum import Enum

import numpy as np

from dlsvm import tensor
from dlsvm.errors import DomainError, ShapeError


class HeadKind(str, Enum):
    SOFTMAX = "softmax"
    L1SVM = "l1svm"
    L2SVM = "l2svm"


@dataclass(frozen=True)
class HeadSpec:
    """
    Which objective tops the network.

    C is read by the SVM heads, weight_decay by softmax; the other one is ignored.
    """

    kind: HeadKind
    num_classes: int
    dim: int
    C: float = 1.0
    weight_decay: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", HeadKind(self.kind))
        if self.num_classes < 2:
            raise DomainError(f"a head needs at least 2 classes, got {self.num_classes}")
        if self.dim < 1:
            raise DomainError(f"penultimate dim must be positive, got {self.dim}")
        if self.kind is HeadKind.SOFTMAX:
            if self.weight_decay < 0:
                raise DomainError(f"weight decay must be non-negative, got {self.weight_decay}")
        elif self.C <= 0:
            raise DomainError(f"SVM penalty C must be positive, got {self.C}")


class HeadWeights:
    """
    Head weight matrix W of shape (D+1) x K. The last row is the bias,
    applied by augmenting h with a constant 1. Column k is the k-th
    one-vs-rest machine.
    """

    def __init__(self, W: np.ndarray) -> None:
        if W.ndim != 2 or W.shape[0] < 2 or W.shape[1] < 1:
            raise ShapeError(f"head weights must be (D+1) x K with D >= 1, got {W.shape}")
        self.W = W

    @classmethod
    def init(cls, dim: int, num_classes: int, rng: np.random.Generator, init_std: float = 0.01, dtype=tensor.DEFAULT_DTYPE):
        W = np.zeros((dim + 1, num_classes), dtype=dtype)
        W[:dim] = rng.standard_normal((dim, num_classes)) * init_std
        return cls(W)

    @property
    def dim(self) -> int:
        return self.W.shape[0] - 1

    @property
    def num_classes(self) -> int:
        return self.W.shape[1]

    @property
    def w(self) -> np.ndarray:
        """Rows without the bias, the part the regulariser sees."""
        return self.W[:-1]

    def norm_sq(self) -> float:
        return float(np.sum(self.w * self.w))

    def copy(self) -> "HeadWeights":
        return HeadWeights(self.W.copy())


@dataclass
class HeadOutput:
    loss: float
    data_loss: float
    d_h: np.ndarray
    d_W: np.ndarray
    scores: np.ndarray


def augment_bias(h: np.ndarray) -> np.ndarray:
    return np.hstack([h, np.ones((h.shape[0], 1), dtype=h.dtype)])


def head_scores(weights: HeadWeights, h: np.ndarray) -> np.ndarray:
    if h.ndim != 2 or h.shape[1] != weights.dim:
        raise ShapeError(f"head expects N x {weights.dim} activations, got {h.shape}")
    return tensor.matmul(augment_bias(h), weights.W)


def backprop_scores(weights: HeadWeights, h: np.ndarray, d_scores: np.ndarray, reg: float) -> tuple[np.ndarray, np.ndarray]:
    """
    Chain rule from d(loss)/d(scores) to h and W, plus reg * w on the
    non-bias rows. d_h drops the augmented coordinate.
    """
    d_W = tensor.matmul(augment_bias(h).T, d_scores)
    if reg:
        d_W[:-1] += reg * weights.w
    d_h = tensor.matmul(d_scores, weights.w.T)
    return d_h, d_W


def softmax_probs(scores: np.ndarray) -> np.ndarray:
    shifted = scores - scores.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def log_softmax(scores: np.ndarray) -> np.ndarray:
    shifted = scores - scores.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def predict(scores: np.ndarray) -> np.ndarray:
    return tensor.reduce("argmax", scores, axis=1)


def encode_targets(labels: np.ndarray, num_classes: int, encoding: str = "one-hot", dtype=tensor.DEFAULT_DTYPE) -> np.ndarray:
    labels = np.asarray(labels)
    if labels.ndim != 1:
        raise ShapeError(f"labels must be a vector, got shape {labels.shape}")
    if labels.size and (labels.min() < 0 or labels.max() >= num_classes):
        raise DomainError(f"labels must lie in [0, {num_classes}), got {labels.min()}..{labels.max()}")
    if encoding == "one-hot":
        out = np.zeros((labels.size, num_classes), dtype=dtype)
    elif encoding == "sign":
        out = -np.ones((labels.size, num_classes), dtype=dtype)
    else:
        raise DomainError(f"unknown target encoding {encoding!r}")
    out[np.arange(labels.size), labels] = 1
    return out


def check_sign_targets(targets: np.ndarray) -> None:
    if targets.ndim != 2:
        raise DomainError(f"sign targets must be N x K, got shape {targets.shape}")
    if not np.all(np.abs(targets) == 1) or not np.all((targets > 0).sum(axis=1) == 1):
        raise DomainError("sign targets need entries in {-1, +1} with exactly one +1 per row")


def load(kind: HeadKind | str):
    """Import the module implementing a head kind."""
    kind = HeadKind(kind)
    return importlib.import_module("dlsvm.head" + "." + kind.value)


def evaluate(spec: HeadSpec, weights: HeadWeights, h: np.ndarray, labels: np.ndarray) -> HeadOutput:
    if weights.dim != spec.dim or weights.num_classes != spec.num_classes:
        raise ShapeError(
            f"head weights {weights.W.shape} do not match spec (D={spec.dim}, K={spec.num_classes})"
        )
    return load(spec.kind).evaluate(weights, h, labels, spec)
