"""
Dense tensor primitives.

Tensors are plain numpy arrays, row-major, batch dimension first (N x D).
The helpers here add the shape checks and fixed conventions
(lowest-index argmax, float64 by default) the rest of the package relies on.
"""

import numpy as np

from dlsvm.errors import DomainError, ShapeError

DEFAULT_DTYPE = np.float64
DTYPES = {"float64": np.float64, "float32": np.float32}

ELEMENTWISE_OPS = ("add", "sub", "mul", "max", "scale")
REDUCE_OPS = ("sum", "mean", "argmax")


def as_tensor(values, shape: tuple | list | None = None, dtype=DEFAULT_DTYPE) -> np.ndarray:
    """
    Build a tensor from a flat row-major sequence (or any array-like).

    Args:
        values: Flat values, or an array-like when shape is None.
        shape: Target shape; product(shape) must equal len(values).
        dtype: Element type, float64 unless the caller opts into float32.

    Returns:
        np.ndarray: A fresh array owned by the caller.
    """
    array = np.array(values, dtype=dtype)
    if shape is None:
        return array
    shape = tuple(int(s) for s in shape)
    if any(s <= 0 for s in shape):
        raise ShapeError(f"dimension sizes must be positive, got {shape}")
    if int(np.prod(shape)) != array.size:
        raise ShapeError(f"{array.size} values cannot fill shape {shape}")
    return array.reshape(shape)


def check_finite(x: np.ndarray, what: str = "tensor") -> np.ndarray:
    if not np.all(np.isfinite(x)):
        raise DomainError(f"{what} contains NaN or Inf")
    return x


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeError(f"matmul needs rank-2 operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul inner dimensions differ: {a.shape} x {b.shape}")
    return a @ b


def elementwise(op: str, a: np.ndarray, b) -> np.ndarray:
    """
    Pointwise add/sub/mul of equal-shaped tensors, or max/scale against a scalar.
    add/sub/mul also accept a scalar right operand.
    """
    if op not in ELEMENTWISE_OPS:
        raise DomainError(f"unknown elementwise op {op!r}")
    if isinstance(b, np.ndarray) and b.ndim > 0:
        if op in ("max", "scale"):
            raise ShapeError(f"{op} takes a scalar operand, got shape {b.shape}")
        if a.shape != b.shape:
            raise ShapeError(f"elementwise {op} shape mismatch: {a.shape} vs {b.shape}")
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "mul" or op == "scale":
        return a * b
    return np.maximum(a, b)


def reduce(op: str, a: np.ndarray, axis: int = 0) -> np.ndarray:
    if op not in REDUCE_OPS:
        raise DomainError(f"unknown reduce op {op!r}")
    if not -a.ndim <= axis < a.ndim:
        raise ShapeError(f"axis {axis} out of range for shape {a.shape}")
    if a.shape[axis] == 0:
        raise DomainError(f"cannot {op} over an empty axis (shape {a.shape})")
    if op == "sum":
        return a.sum(axis=axis)
    if op == "mean":
        return a.mean(axis=axis)
    # np.argmax returns the first occurrence, i.e. the lowest index on ties
    return np.argmax(a, axis=axis)
