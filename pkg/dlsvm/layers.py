"""
Differentiable layers.

Every layer follows the same contract: forward(x, train, rng) caches what
backward needs, backward(d_out) returns LayerGradients. Parameterised layers
expose params() and keep the gradients of the last backward in grads().
Images are N x C x H x W.
"""

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from dlsvm import tensor
from dlsvm.errors import DomainError, ShapeError, StateError

DEFAULT_INIT_STD = 0.01


@dataclass
class LayerGradients:
    d_input: np.ndarray
    d_weights: np.ndarray | None = None
    d_bias: np.ndarray | None = None


@dataclass
class PoolSwitches:
    """Winning position (0..3, row-major inside the window) of every 2x2 window."""

    indices: np.ndarray
    input_shape: tuple


class Layer:
    name = "layer"

    def forward(self, x: np.ndarray, train: bool = False, rng=None) -> np.ndarray:
        raise NotImplementedError

    def backward(self, d_out: np.ndarray) -> LayerGradients:
        raise NotImplementedError

    def params(self) -> dict[str, np.ndarray]:
        return {}

    def grads(self) -> dict[str, np.ndarray]:
        return {}

    def __str__(self) -> str:
        return f"{type(self).__name__}()"


class DenseLayer(Layer):
    """
    Fully connected layer, x @ W + b.

    Attributes:
        weights (np.ndarray): in x out matrix. Its shape is fixed at construction.
        bias (np.ndarray): out vector.
    """

    name = "dense"

    def __init__(
        self,
        in_dim: int,
        out_dim: int,
        rng: np.random.Generator | None = None,
        init_std: float = DEFAULT_INIT_STD,
        dtype=tensor.DEFAULT_DTYPE,
    ) -> None:
        rng = rng if rng is not None else np.random.default_rng(0)
        self.__weights = (rng.standard_normal((in_dim, out_dim)) * init_std).astype(dtype)
        self.bias = np.zeros(out_dim, dtype=dtype)
        self.cached_input = None
        self.d_weights = None
        self.d_bias = None

    @property
    def weights(self) -> np.ndarray:
        return self.__weights

    @weights.setter
    def weights(self, value: np.ndarray) -> None:
        if value.shape != self.__weights.shape:
            raise ShapeError(
                f"dense weights are {self.__weights.shape}, cannot assign {value.shape}"
            )
        self.__weights = value

    @property
    def in_dim(self) -> int:
        return self.__weights.shape[0]

    @property
    def out_dim(self) -> int:
        return self.__weights.shape[1]

    def forward(self, x, train=False, rng=None):
        return dense_forward(self, x)

    def backward(self, d_out):
        grads = dense_backward(self, d_out)
        self.d_weights, self.d_bias = grads.d_weights, grads.d_bias
        return grads

    def params(self):
        return {"weights": self.weights, "bias": self.bias}

    def grads(self):
        return {"weights": self.d_weights, "bias": self.d_bias}

    def __str__(self) -> str:
        return f"DenseLayer({self.in_dim} -> {self.out_dim})"


def dense_forward(layer: DenseLayer, x: np.ndarray) -> np.ndarray:
    if x.ndim != 2 or x.shape[1] != layer.in_dim:
        raise ShapeError(f"dense layer expects N x {layer.in_dim} input, got {x.shape}")
    layer.cached_input = x
    return tensor.matmul(x, layer.weights) + layer.bias


def dense_backward(layer: DenseLayer, d_out: np.ndarray) -> LayerGradients:
    x = layer.cached_input
    if x is None:
        raise StateError("dense backward called before forward")
    if d_out.shape != (x.shape[0], layer.out_dim):
        raise ShapeError(
            f"dense d_out must be {(x.shape[0], layer.out_dim)}, got {d_out.shape}"
        )
    return LayerGradients(
        d_input=tensor.matmul(d_out, layer.weights.T),
        d_weights=tensor.matmul(x.T, d_out),
        d_bias=d_out.sum(axis=0),
    )


def relu(x: np.ndarray) -> np.ndarray:
    return tensor.elementwise("max", x, 0)


def relu_backward(d_out: np.ndarray, cached_x: np.ndarray) -> np.ndarray:
    if d_out.shape != cached_x.shape:
        raise ShapeError(f"relu backward shape mismatch: {d_out.shape} vs {cached_x.shape}")
    # subgradient at exactly 0 is 0
    return np.where(cached_x > 0, d_out, 0)


class ReLU(Layer):
    name = "relu"

    def __init__(self) -> None:
        self.cached_input = None

    def forward(self, x, train=False, rng=None):
        self.cached_input = x
        return relu(x)

    def backward(self, d_out):
        if self.cached_input is None:
            raise StateError("relu backward called before forward")
        return LayerGradients(d_input=relu_backward(d_out, self.cached_input))


class ConvLayer(Layer):
    """
    2-D cross-correlation (no kernel flip) with zero padding and per-channel bias.

    Attributes:
        filters (np.ndarray): out_channels x in_channels x kh x kw.
        bias (np.ndarray): out_channels.
        padding (int): Zero padding on every border, defaults to k // 2.
        stride (int): Window step.
    """

    name = "conv"

    def __init__(
        self,
        in_channels: int,
        out_channels: int,
        kernel: int,
        padding: int | None = None,
        stride: int = 1,
        rng: np.random.Generator | None = None,
        init_std: float = DEFAULT_INIT_STD,
        dtype=tensor.DEFAULT_DTYPE,
    ) -> None:
        if stride < 1:
            raise DomainError(f"stride must be positive, got {stride}")
        padding = kernel // 2 if padding is None else padding
        if padding < 0:
            raise DomainError(f"padding must be non-negative, got {padding}")
        rng = rng if rng is not None else np.random.default_rng(0)
        shape = (out_channels, in_channels, kernel, kernel)
        self.filters = (rng.standard_normal(shape) * init_std).astype(dtype)
        self.bias = np.zeros(out_channels, dtype=dtype)
        self.padding = padding
        self.stride = stride
        self.cache = None
        self.d_filters = None
        self.d_bias = None

    def output_size(self, height: int, width: int) -> tuple[int, int]:
        _, _, kh, kw = self.filters.shape
        out_h = (height + 2 * self.padding - kh) // self.stride + 1
        out_w = (width + 2 * self.padding - kw) // self.stride + 1
        if out_h <= 0 or out_w <= 0:
            raise ShapeError(
                f"{kh}x{kw} kernel with padding {self.padding} does not fit a {height}x{width} input"
            )
        return out_h, out_w

    def forward(self, x, train=False, rng=None):
        return conv2d_forward(self, x)

    def backward(self, d_out):
        grads = conv2d_backward(self, d_out)
        self.d_filters, self.d_bias = grads.d_weights, grads.d_bias
        return grads

    def params(self):
        return {"filters": self.filters, "bias": self.bias}

    def grads(self):
        return {"filters": self.d_filters, "bias": self.d_bias}

    def __str__(self) -> str:
        out_c, in_c, kh, kw = self.filters.shape
        return f"ConvLayer({in_c} -> {out_c}, {kh}x{kw}, pad {self.padding})"


def _im2col(layer: ConvLayer, x: np.ndarray) -> tuple[np.ndarray, np.ndarray, tuple]:
    p = layer.padding
    padded = np.pad(x, ((0, 0), (0, 0), (p, p), (p, p)))
    _, _, kh, kw = layer.filters.shape
    out_h, out_w = layer.output_size(x.shape[2], x.shape[3])
    s = layer.stride
    # N x C x out_h x out_w x kh x kw
    windows = sliding_window_view(padded, (kh, kw), axis=(2, 3))[
        :, :, : (out_h - 1) * s + 1 : s, : (out_w - 1) * s + 1 : s
    ]
    cols = windows.transpose(0, 2, 3, 1, 4, 5).reshape(x.shape[0] * out_h * out_w, -1)
    return cols, padded, (out_h, out_w)


def conv2d_forward(layer: ConvLayer, x: np.ndarray) -> np.ndarray:
    if x.ndim != 4:
        raise ShapeError(f"conv layer expects N x C x H x W input, got {x.shape}")
    out_c, in_c, _, _ = layer.filters.shape
    if x.shape[1] != in_c:
        raise ShapeError(f"conv layer expects {in_c} channels, got input {x.shape}")
    cols, padded, (out_h, out_w) = _im2col(layer, x)
    out = cols @ layer.filters.reshape(out_c, -1).T + layer.bias
    layer.cache = (x.shape, padded.shape, cols)
    return out.reshape(x.shape[0], out_h, out_w, out_c).transpose(0, 3, 1, 2)


def conv2d_backward(layer: ConvLayer, d_out: np.ndarray) -> LayerGradients:
    if layer.cache is None:
        raise StateError("conv backward called before forward")
    x_shape, padded_shape, cols = layer.cache
    out_c, in_c, kh, kw = layer.filters.shape
    n = x_shape[0]
    out_h, out_w = layer.output_size(x_shape[2], x_shape[3])
    if d_out.shape != (n, out_c, out_h, out_w):
        raise ShapeError(f"conv d_out must be {(n, out_c, out_h, out_w)}, got {d_out.shape}")

    d_rows = d_out.transpose(0, 2, 3, 1).reshape(-1, out_c)
    d_filters = (d_rows.T @ cols).reshape(layer.filters.shape)
    d_bias = d_rows.sum(axis=0)

    d_cols = (d_rows @ layer.filters.reshape(out_c, -1)).reshape(n, out_h, out_w, in_c, kh, kw)
    d_padded = np.zeros(padded_shape, dtype=d_out.dtype)
    s = layer.stride
    for i in range(kh):
        for j in range(kw):
            d_padded[:, :, i : i + s * out_h : s, j : j + s * out_w : s] += d_cols[
                :, :, :, :, i, j
            ].transpose(0, 3, 1, 2)
    p = layer.padding
    d_input = d_padded[:, :, p : p + x_shape[2], p : p + x_shape[3]]
    return LayerGradients(d_input=d_input, d_weights=d_filters, d_bias=d_bias)


def maxpool2x2(x: np.ndarray) -> tuple[np.ndarray, PoolSwitches]:
    """
    2x2 max pooling with stride 2.

    Returns:
        tuple: Pooled tensor and the switches maxpool_backward routes through.
    """
    if x.ndim != 4:
        raise ShapeError(f"maxpool expects N x C x H x W input, got {x.shape}")
    n, c, h, w = x.shape
    if h % 2 or w % 2:
        raise ShapeError(f"maxpool2x2 needs even spatial dims, got {h}x{w}")
    windows = (
        x.reshape(n, c, h // 2, 2, w // 2, 2)
        .transpose(0, 1, 2, 4, 3, 5)
        .reshape(n, c, h // 2, w // 2, 4)
    )
    indices = np.argmax(windows, axis=-1)
    out = np.take_along_axis(windows, indices[..., None], axis=-1)[..., 0]
    return out, PoolSwitches(indices=indices, input_shape=x.shape)


def maxpool_backward(d_out: np.ndarray, switches: PoolSwitches) -> np.ndarray:
    n, c, h, w = switches.input_shape
    if d_out.shape != switches.indices.shape:
        raise ShapeError(
            f"maxpool d_out must be {switches.indices.shape}, got {d_out.shape}"
        )
    d_windows = np.zeros((n, c, h // 2, w // 2, 4), dtype=d_out.dtype)
    np.put_along_axis(d_windows, switches.indices[..., None], d_out[..., None], axis=-1)
    return (
        d_windows.reshape(n, c, h // 2, w // 2, 2, 2)
        .transpose(0, 1, 2, 4, 3, 5)
        .reshape(n, c, h, w)
    )


class MaxPool2x2(Layer):
    name = "maxpool"

    def __init__(self) -> None:
        self.switches = None

    def forward(self, x, train=False, rng=None):
        out, self.switches = maxpool2x2(x)
        return out

    def backward(self, d_out):
        if self.switches is None:
            raise StateError("maxpool backward called before forward")
        return LayerGradients(d_input=maxpool_backward(d_out, self.switches))


class Flatten(Layer):
    name = "flatten"

    def __init__(self) -> None:
        self.input_shape = None

    def forward(self, x, train=False, rng=None):
        self.input_shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, d_out):
        if self.input_shape is None:
            raise StateError("flatten backward called before forward")
        return LayerGradients(d_input=d_out.reshape(self.input_shape))


def _check_rate(rate: float) -> None:
    if not 0 <= rate < 1:
        raise DomainError(f"dropout rate must be in [0, 1), got {rate}")


def dropout_mask(shape: tuple, rate: float, rng: np.random.Generator, dtype=tensor.DEFAULT_DTYPE):
    _check_rate(rate)
    keep = rng.random(shape) >= rate
    return keep.astype(dtype) / (1.0 - rate)


def dropout(x: np.ndarray, rate: float, mode: str, rng: np.random.Generator | None = None) -> np.ndarray:
    """Inverted dropout: survivors are scaled by 1/(1-rate), eval mode is the identity."""
    _check_rate(rate)
    if mode not in ("train", "eval"):
        raise DomainError(f"dropout mode must be 'train' or 'eval', got {mode!r}")
    if mode == "eval" or rate == 0:
        return x
    return tensor.elementwise("mul", x, dropout_mask(x.shape, rate, rng, x.dtype))


class Dropout(Layer):
    name = "dropout"

    def __init__(self, rate: float) -> None:
        _check_rate(rate)
        self.rate = rate
        self.mask = None

    def forward(self, x, train=False, rng=None):
        if not train or self.rate == 0:
            self.mask = None
            return x
        self.mask = dropout_mask(x.shape, self.rate, rng, x.dtype)
        return tensor.elementwise("mul", x, self.mask)

    def backward(self, d_out):
        if self.mask is None:
            return LayerGradients(d_input=d_out)
        return LayerGradients(d_input=d_out * self.mask)

    def __str__(self) -> str:
        return f"Dropout({self.rate})"


def gaussian_noise(x: np.ndarray, std: float, rng: np.random.Generator | None = None) -> np.ndarray:
    if std < 0:
        raise DomainError(f"noise std must be non-negative, got {std}")
    if std == 0:
        return x
    return x + rng.normal(0.0, std, size=x.shape).astype(x.dtype)
