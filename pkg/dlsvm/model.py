"""
This defines the Network model.
A stack of layers produces the penultimate activation h; a head turns h into
K scores and, given labels, into a loss with gradients.
"""

import numpy as np

from dlsvm import head as heads
from dlsvm.head import HeadKind, HeadOutput, HeadSpec, HeadWeights
from dlsvm.errors import ShapeError
from dlsvm.layers import Layer, gaussian_noise

EVAL_CHUNK = 500


class Network:
    """
    Network model.

    Attributes:
        layers (list[Layer]): Layers below the head, in forward order.
        head_spec (HeadSpec): Objective on top, with its C or weight decay.
        head_weights (HeadWeights): (D+1) x K head matrix, bias in the last row.
        input_shape (tuple | None): Per-example shape the first layer expects;
            flat inputs are reshaped to it (image form for conv nets).

    Methods:
        forward(x, train, rng, noise_std) -> np.ndarray: Penultimate activation.
        loss(x, labels, ...) -> HeadOutput: Head objective on a minibatch.
        backward(output) -> np.ndarray: Backprop from the head into every layer.
        scores(x) -> np.ndarray: Eval-mode K-dim scores.
        predict(x) -> np.ndarray: Argmax labels.
    """

    def __init__(
        self,
        layers: list[Layer],
        head_spec: HeadSpec,
        head_weights: HeadWeights,
        input_shape: tuple | None = None,
    ) -> None:
        self.layers = layers
        self.head_spec = head_spec
        self.head_weights = head_weights
        self.input_shape = tuple(input_shape) if input_shape else None
        self.d_head = None

    def __str__(self) -> str:
        stack = " -> ".join(str(layer) for layer in self.layers)
        return f"Network({stack} -> {self.head_spec.kind.value} head, K={self.head_spec.num_classes})"

    @property
    def kind(self) -> HeadKind:
        return self.head_spec.kind

    def _reshape(self, x: np.ndarray) -> np.ndarray:
        if self.input_shape is None:
            return x
        return x.reshape((x.shape[0],) + self.input_shape)

    def forward(
        self,
        x: np.ndarray,
        train: bool = False,
        rng: np.random.Generator | None = None,
        noise_std: float = 0.0,
    ) -> np.ndarray:
        out = self._reshape(x)
        # input noise only, and only while training
        if train and noise_std:
            out = gaussian_noise(out, noise_std, rng)
        for layer in self.layers:
            out = layer.forward(out, train=train, rng=rng)
        return out

    def loss(
        self,
        x: np.ndarray,
        labels: np.ndarray,
        train: bool = False,
        rng: np.random.Generator | None = None,
        noise_std: float = 0.0,
    ) -> HeadOutput:
        h = self.forward(x, train=train, rng=rng, noise_std=noise_std)
        return heads.evaluate(self.head_spec, self.head_weights, h, labels)

    def backward(self, output: HeadOutput) -> np.ndarray:
        self.d_head = output.d_W
        d = output.d_h
        for layer in reversed(self.layers):
            d = layer.backward(d).d_input
        return d

    def scores(self, x: np.ndarray) -> np.ndarray:
        chunks = [
            heads.head_scores(self.head_weights, self.forward(x[i : i + EVAL_CHUNK]))
            for i in range(0, x.shape[0], EVAL_CHUNK)
        ]
        return np.concatenate(chunks)

    def predict(self, x: np.ndarray) -> np.ndarray:
        return heads.predict(self.scores(x))

    def parameters(self) -> list[tuple[str, np.ndarray]]:
        """Named parameter arrays, lower layers first, head last."""
        named = []
        for i, layer in enumerate(self.layers):
            for name, value in layer.params().items():
                named.append((f"{i}.{layer.name}.{name}", value))
        named.append(("head.W", self.head_weights.W))
        return named

    def gradients(self) -> list[np.ndarray]:
        """Gradients of the last backward, aligned with parameters()."""
        grads = []
        for layer in self.layers:
            grads.extend(layer.grads().values())
        grads.append(self.d_head)
        return grads

    def load_parameters(self, tensors: dict[str, np.ndarray]) -> None:
        """Copy values into the existing parameter buffers (shapes must match)."""
        for name, value in self.parameters():
            source = tensors[name]
            if source.shape != value.shape:
                raise ShapeError(f"{name}: stored shape {source.shape}, model expects {value.shape}")
            value[...] = source

    def architecture(self) -> list[tuple[str, tuple]]:
        """Layer names and parameter shapes below the head."""
        return [(name, value.shape) for name, value in self.parameters()[:-1]]

    def with_head(self, spec: HeadSpec) -> "Network":
        """Same layers and head weights under a different objective."""
        return Network(self.layers, spec, self.head_weights, self.input_shape)
