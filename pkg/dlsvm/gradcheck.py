"""
Finite difference gradient checks.

Analytic gradients are compared with central differences of a scalar loss.
The error is |analytic - numeric| / max(ERROR_FLOOR, |analytic|, |numeric|):
relative for gradients above ERROR_FLOOR in magnitude. Below it the error is
measured against the floor, so central-difference round-off on near-zero
entries does not count as a failure while any absolute error above
ERROR_FLOOR * tol still does.
Points within KINK of a ReLU/maxpool/hinge kink are excluded.
"""

import logging
from collections.abc import Callable
from dataclasses import dataclass, field

import numpy as np

from dlsvm import head as heads
from dlsvm.errors import GradcheckError
from dlsvm.head import HeadKind, HeadSpec, HeadWeights
from dlsvm.layers import ConvLayer, DenseLayer, Dropout, MaxPool2x2, ReLU, maxpool2x2
from dlsvm.model import Network

logger = logging.getLogger(__name__)

KINK = 1e-4
HINGE_KINK = 1e-3
# a perturbation of a low layer moves deeper pre-activations further
NETWORK_KINK = 1e-2
MAX_RESAMPLES = 100
# central differences at eps=1e-5 resolve gradients to about 1e-10
ERROR_FLOOR = 1e-3


def numeric_gradient(f: Callable[[], float], x: np.ndarray, eps: float = 1e-5) -> np.ndarray:
    """Central differences of f() with respect to every entry of x (perturbed in place)."""
    grad = np.zeros_like(x)
    for index in np.ndindex(x.shape):
        original = x[index]
        x[index] = original + eps
        plus = f()
        x[index] = original - eps
        minus = f()
        x[index] = original
        grad[index] = (plus - minus) / (2 * eps)
    return grad


def scaled_error(analytic: np.ndarray, numeric: np.ndarray) -> np.ndarray:
    return np.abs(analytic - numeric) / np.maximum(ERROR_FLOOR, np.maximum(np.abs(analytic), np.abs(numeric)))


@dataclass
class CheckResult:
    tensor: str
    max_error: float
    index: tuple
    analytic: float
    numeric: float
    tol: float

    @property
    def ok(self) -> bool:
        return self.max_error < self.tol

    def error(self) -> GradcheckError:
        return GradcheckError(self.tensor, self.index, self.analytic, self.numeric)


@dataclass
class GradcheckReport:
    results: list[CheckResult] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(r.ok for r in self.results)

    @property
    def max_error(self) -> float:
        return max((r.max_error for r in self.results), default=0.0)

    def failures(self) -> list[CheckResult]:
        return [r for r in self.results if not r.ok]

    def raise_for_failure(self) -> None:
        failures = self.failures()
        if failures:
            raise failures[0].error()


def check_gradient(
    name: str,
    analytic: np.ndarray,
    f: Callable[[], float],
    x: np.ndarray,
    eps: float = 1e-5,
    tol: float = 1e-6,
) -> CheckResult:
    numeric = numeric_gradient(f, x, eps)
    errors = scaled_error(analytic, numeric)
    index = np.unravel_index(int(np.argmax(errors)), errors.shape) if errors.size else ()
    index = tuple(int(i) for i in index)
    result = CheckResult(
        tensor=name,
        max_error=float(errors[index]) if errors.size else 0.0,
        index=index,
        analytic=float(analytic[index]) if errors.size else 0.0,
        numeric=float(numeric[index]) if errors.size else 0.0,
        tol=tol,
    )
    log = logger.debug if result.ok else logger.error
    log("gradcheck %s: max error %.3g at %s", name, result.max_error, list(index))
    return result


def _warn_on_kink(name: str) -> None:
    logger.warning("gradcheck %s: no sample clear of every kink after %d draws, checking the last one", name, MAX_RESAMPLES)


def _sum_loss(out: np.ndarray, weights: np.ndarray) -> float:
    return float(np.sum(out * weights))


def check_dense(rng: np.random.Generator, eps: float = 1e-5, tol: float = 1e-6) -> list[CheckResult]:
    layer = DenseLayer(3, 4, rng, init_std=1.0)
    layer.bias[:] = rng.standard_normal(4)
    x = rng.standard_normal((5, 3))
    upstream = rng.standard_normal((5, 4))
    layer.forward(x)
    grads = layer.backward(upstream)

    def f():
        return _sum_loss(layer.forward(x), upstream)

    return [
        check_gradient("dense.weights", grads.d_weights, f, layer.weights, eps, tol),
        check_gradient("dense.bias", grads.d_bias, f, layer.bias, eps, tol),
        check_gradient("dense.input", grads.d_input, f, x, eps, tol),
    ]


def check_relu(rng: np.random.Generator, eps: float = 1e-5, tol: float = 1e-6) -> list[CheckResult]:
    x = rng.standard_normal((4, 6))
    # push entries away from the kink
    x[np.abs(x) < KINK] += 10 * KINK
    upstream = rng.standard_normal(x.shape)
    layer = ReLU()
    layer.forward(x)
    d_input = layer.backward(upstream).d_input
    return [check_gradient("relu.input", d_input, lambda: _sum_loss(layer.forward(x), upstream), x, eps, tol)]


def _pool_gap(x: np.ndarray, skip_zero_windows: bool = False) -> float:
    """Smallest gap between the two largest values of any 2x2 window."""
    n, c, h, w = x.shape
    windows = np.sort(
        x.reshape(n, c, h // 2, 2, w // 2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(-1, 4), axis=1
    )
    if skip_zero_windows:
        # all-zero windows after a ReLU pass no gradient either way
        windows = windows[windows[:, -1] > 0]
    if not windows.size:
        return np.inf
    return float(np.min(windows[:, -1] - windows[:, -2]))


def check_maxpool(rng: np.random.Generator, eps: float = 1e-5, tol: float = 1e-6) -> list[CheckResult]:
    x = rng.standard_normal((2, 1, 4, 4))
    for _ in range(MAX_RESAMPLES):
        if _pool_gap(x) > KINK:
            break
        x = rng.standard_normal((2, 1, 4, 4))
    else:
        _warn_on_kink("maxpool")
    out, _ = maxpool2x2(x)
    upstream = rng.standard_normal(out.shape)
    layer = MaxPool2x2()
    layer.forward(x)
    d_input = layer.backward(upstream).d_input
    return [check_gradient("maxpool.input", d_input, lambda: _sum_loss(layer.forward(x), upstream), x, eps, tol)]


def check_conv(rng: np.random.Generator, eps: float = 1e-5, tol: float = 1e-6) -> list[CheckResult]:
    layer = ConvLayer(2, 3, 3, padding=1, rng=rng, init_std=1.0)
    layer.bias[:] = rng.standard_normal(3)
    x = rng.standard_normal((1, 2, 6, 6))
    upstream = rng.standard_normal(layer.forward(x).shape)
    grads = layer.backward(upstream)

    def f():
        return _sum_loss(layer.forward(x), upstream)

    return [
        check_gradient("conv.filters", grads.d_weights, f, layer.filters, eps, tol),
        check_gradient("conv.bias", grads.d_bias, f, layer.bias, eps, tol),
        check_gradient("conv.input", grads.d_input, f, x, eps, tol),
    ]


def _margins_clear(spec: HeadSpec, weights: HeadWeights, h: np.ndarray, labels: np.ndarray) -> bool:
    if spec.kind is not HeadKind.L1SVM:
        return True
    margins = heads.head_scores(weights, h) * heads.encode_targets(labels, spec.num_classes, "sign")
    return bool(np.all(np.abs(margins - 1) >= HINGE_KINK))


def check_head(kind: HeadKind | str, rng: np.random.Generator, eps: float = 1e-5, tol: float = 1e-6) -> list[CheckResult]:
    """Head gradients on a random 4 x (3+1) x 5 instance; L1-SVM resampled away from margin 1."""
    spec = HeadSpec(kind=kind, num_classes=5, dim=3, C=0.7, weight_decay=0.01)
    for _ in range(MAX_RESAMPLES):
        weights = HeadWeights(rng.standard_normal((4, 5)))
        h = rng.standard_normal((4, 3))
        labels = rng.integers(0, 5, size=4)
        if _margins_clear(spec, weights, h, labels):
            break
    else:
        _warn_on_kink(spec.kind.value)
    out = heads.evaluate(spec, weights, h, labels)

    def f():
        return heads.evaluate(spec, weights, h, labels).loss

    name = spec.kind.value
    return [
        check_gradient(f"{name}.W", out.d_W, f, weights.W, eps, tol),
        check_gradient(f"{name}.h", out.d_h, f, h, eps, tol),
    ]


def _network_clear(network: Network, x: np.ndarray, labels: np.ndarray) -> bool:
    h = network.forward(x)
    for layer in network.layers:
        if isinstance(layer, ReLU) and np.min(np.abs(layer.cached_input)) < NETWORK_KINK:
            return False
    for i, layer in enumerate(network.layers):
        if isinstance(layer, MaxPool2x2):
            # recompute the pooled input
            pooled_input = x.reshape((x.shape[0],) + network.input_shape) if network.input_shape else x
            for previous in network.layers[:i]:
                pooled_input = previous.forward(pooled_input)
            if _pool_gap(pooled_input, skip_zero_windows=True) < NETWORK_KINK:
                return False
    return _margins_clear(network.head_spec, network.head_weights, h, labels)


def check_network(
    network: Network, input_dim: int, rng: np.random.Generator, eps: float = 1e-5, tol: float = 1e-6
) -> list[CheckResult]:
    """End-to-end check of every parameter of a (tiny) network in eval mode."""
    K = network.head_spec.num_classes
    for _ in range(MAX_RESAMPLES):
        x = rng.standard_normal((3, input_dim))
        labels = rng.integers(0, K, size=3)
        if _network_clear(network, x, labels):
            break
    else:
        _warn_on_kink("network")
    out = network.loss(x, labels)
    network.backward(out)

    def f():
        return network.loss(x, labels).loss

    grads = network.gradients()
    return [
        check_gradient(name, grad.copy(), f, value, eps, tol)
        for (name, value), grad in zip(network.parameters(), grads)
    ]


def layer_kinds(network: Network) -> set[type]:
    return {type(layer) for layer in network.layers} - {Dropout}
