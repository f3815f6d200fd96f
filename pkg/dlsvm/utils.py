"""
This file includes utils for configuring and building a run.
They are referenced in main.py and harness.py.
"""

import dataclasses
import logging
from dataclasses import dataclass, field

import numpy as np
import yaml

from dlsvm import tensor
from dlsvm.errors import ConfigError
from dlsvm.head import HeadKind, HeadSpec, HeadWeights
from dlsvm.layers import ConvLayer, DenseLayer, Dropout, Flatten, MaxPool2x2, ReLU
from dlsvm.model import Network
from dlsvm.preprocess import STD_FLOOR, Pipeline

logger = logging.getLogger(__name__)

# Values the MNIST/CIFAR recipes never state; defaulted here and flagged in the echo.
ARTIFACT_DEFAULTS = {"momentum", "init_std", "max_jitter", "C"}
DATASETS = ("blobs", "idx", "cifar")
ARCHITECTURES = ("mlp", "convnet")


@dataclass
class RunConfig:
    """
    Everything a run needs besides its input files.

    Attributes mirror the keys of a config/*.yaml file one to one.
    """

    dataset: str = "blobs"
    train_images: str = ""
    train_labels: str = ""
    test_images: str = ""
    test_labels: str = ""
    cifar_train: list = field(default_factory=list)
    cifar_test: list = field(default_factory=list)
    train_subset: int = 0
    data_seed: int = 0
    blobs_n: int = 400
    blobs_test_n: int = 200
    blobs_k: int = 4
    blobs_d: int = 8
    blobs_separation: float = 20.0

    face_normalize: bool = False
    standardize: bool = False
    pca_dims: int = 0

    architecture: str = "mlp"
    hidden: list = field(default_factory=lambda: [512, 512])
    image_shape: list = field(default_factory=lambda: [3, 32, 32])
    conv_filters: list = field(default_factory=lambda: [32, 64])
    conv_kernel: int = 5
    penultimate: int = 3072
    dropout: float = 0.0

    head: str = "l2svm"
    C: float = 0.01
    weight_decay: float = 0.001
    lower_weight_decay: float = 0.0
    init_std: float = 0.01

    momentum: float = 0.9
    lr_start: float = 0.1
    lr_end: float = 0.0
    noise_start: float = 0.0
    noise_end: float = 0.0
    epochs: int = 50
    batch_size: int = 200
    seed: int = 0
    augment: bool = False
    max_jitter: int = 2

    log_every_update: bool = False
    dtype: str = "float64"
    folds: int = 0
    gradcheck_eps: float = 1e-5
    gradcheck_tol: float = 1e-6
    out_dir: str = "runs/default"

    explicit: set = field(default_factory=set, repr=False, compare=False)

    @classmethod
    def keys(cls) -> list[str]:
        return [f.name for f in dataclasses.fields(cls) if f.name != "explicit"]

    def validate(self) -> "RunConfig":
        def require(condition: bool, message: str) -> None:
            if not condition:
                raise ConfigError(message)

        require(self.dataset in DATASETS, f"dataset must be one of {DATASETS}, got {self.dataset!r}")
        if self.dataset == "idx":
            require(
                all([self.train_images, self.train_labels, self.test_images, self.test_labels]),
                "dataset idx needs train_images, train_labels, test_images and test_labels",
            )
        if self.dataset == "cifar":
            require(self.cifar_train and self.cifar_test, "dataset cifar needs cifar_train and cifar_test")
        require(self.blobs_k >= 2, "blobs_k must be >= 2")
        require(self.blobs_n >= self.blobs_k and self.blobs_d >= 1, "blobs_n >= blobs_k and blobs_d >= 1 required")
        require(self.blobs_test_n >= 0 and self.train_subset >= 0, "blobs_test_n and train_subset must be >= 0")
        require(self.architecture in ARCHITECTURES, f"architecture must be one of {ARCHITECTURES}")
        require(
            bool(self.hidden) and all(isinstance(h, int) and h > 0 for h in self.hidden),
            "hidden must be a non-empty list of positive integers",
        )
        require(self.pca_dims >= 0, "pca_dims must be >= 0")
        if self.architecture == "convnet":
            require(len(self.image_shape) == 3, "image_shape must be [C, H, W]")
            require(self.pca_dims == 0, "a convnet consumes images; pca_dims must be 0")
            require(
                len(self.conv_filters) >= 1 and all(isinstance(c, int) and c > 0 for c in self.conv_filters),
                "conv_filters must be a non-empty list of positive integers",
            )
            require(self.conv_kernel >= 1 and self.penultimate >= 1, "conv_kernel and penultimate must be positive")
        require(not self.augment or self.architecture == "convnet", "augment needs image inputs (architecture convnet)")
        require(0 <= self.dropout < 1, "dropout must be in [0, 1)")
        require(self.head in {k.value for k in HeadKind}, f"head must be one of {[k.value for k in HeadKind]}")
        require(self.C > 0, "C must be positive")
        require(self.weight_decay >= 0 and self.lower_weight_decay >= 0, "weight decays must be >= 0")
        require(self.init_std > 0, "init_std must be positive")
        require(0 <= self.momentum < 1, "momentum must be in [0, 1)")
        require(self.lr_start >= 0 and self.lr_end >= 0, "learning rates must be >= 0")
        require(self.noise_start >= 0 and self.noise_end >= 0, "noise std must be >= 0")
        require(self.epochs >= 0 and self.batch_size >= 1, "epochs >= 0 and batch_size >= 1 required")
        require(self.max_jitter >= 0, "max_jitter must be >= 0")
        require(self.dtype in tensor.DTYPES, f"dtype must be one of {list(tensor.DTYPES)}")
        require(self.folds == 0 or self.folds >= 2, "folds must be 0 or >= 2")
        require(self.gradcheck_eps > 0 and self.gradcheck_tol > 0, "gradcheck_eps and gradcheck_tol must be positive")
        return self

    def override(self, **values) -> "RunConfig":
        """Apply non-None overrides (CLI flags) and validate again."""
        values = {k: _coerce(k, v) for k, v in values.items() if v is not None}
        updated = dataclasses.replace(self, **values)
        updated.explicit = self.explicit | set(values)
        return updated.validate()

    def echo(self) -> dict:
        """Every key with its value, where it came from, and whether it is an unstated artifact default."""
        echo = {
            key: {
                "value": getattr(self, key),
                "source": "config" if key in self.explicit else "default",
                "artifact_default": key in ARTIFACT_DEFAULTS and key not in self.explicit,
            }
            for key in self.keys()
        }
        # set by the implementation, not by any config key
        fixed = {"pixel_std_floor": STD_FLOOR, "conv_padding": self.conv_kernel // 2}
        for key, value in fixed.items():
            echo[key] = {"value": value, "source": "fixed", "artifact_default": True}
        return echo

    @property
    def np_dtype(self):
        return tensor.DTYPES[self.dtype]


def _coerce(key: str, value):
    """Check a value against the type of its default; ints are accepted for floats."""
    if key not in RunConfig.keys():
        raise ConfigError(f"unknown config key {key!r}")
    default = RunConfig.__dataclass_fields__[key]
    expected = type(default.default_factory()) if default.default is dataclasses.MISSING else type(default.default)
    if expected is float and isinstance(value, int) and not isinstance(value, bool):
        return float(value)
    if expected is float and isinstance(value, str):
        # yaml 1.1 reads 1e-5 (no dot) as a string
        try:
            return float(value)
        except ValueError:
            raise ConfigError(f"{key} must be float, got {value!r}") from None
    if expected is int and isinstance(value, bool):
        raise ConfigError(f"{key} must be {expected.__name__}, got {value!r}")
    if not isinstance(value, expected):
        raise ConfigError(f"{key} must be {expected.__name__}, got {value!r}")
    return value


def load_config(path: str) -> RunConfig:
    """
    Load a run config from a flat yaml file.

    Args:
        path (str): The path of the yaml file.

    Returns:
        RunConfig: The validated config. Unknown keys are errors.
    """
    with open(path, "r", encoding="utf-8") as stream:
        try:
            values = yaml.safe_load(stream) or {}
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    if not isinstance(values, dict):
        raise ConfigError(f"{path}: expected a key: value mapping")
    values = {key: _coerce(key, value) for key, value in values.items()}
    config = RunConfig(**values)
    config.explicit = set(values)
    return config.validate()


def run_seeds(seed: int) -> tuple[np.random.Generator, np.random.Generator]:
    """Independent generators for initialisation and training, both derived from one seed."""
    init_seq, train_seq = np.random.SeedSequence(seed).spawn(2)
    return np.random.default_rng(init_seq), np.random.default_rng(train_seq)


def head_spec(config: RunConfig, dim: int, num_classes: int, kind: str | None = None) -> HeadSpec:
    return HeadSpec(
        kind=kind or config.head,
        num_classes=num_classes,
        dim=dim,
        C=config.C,
        weight_decay=config.weight_decay,
    )


def build_pipeline(config: RunConfig) -> Pipeline:
    return Pipeline(face=config.face_normalize, standardize=config.standardize, pca_dims=config.pca_dims)


def build_network(config: RunConfig, input_dim: int, num_classes: int, rng: np.random.Generator) -> Network:
    """
    Build the layer stack and head named by the config.

    Args:
        config (RunConfig): Architecture, head and init settings.
        input_dim (int): Flat input width after preprocessing.
        num_classes (int): K.
        rng (np.random.Generator): Initialisation generator.

    Returns:
        Network: Freshly initialised network.
    """
    dtype = config.np_dtype
    std = config.init_std
    layers = []
    if config.architecture == "mlp":
        width = input_dim
        for size in config.hidden:
            layers += [DenseLayer(width, size, rng, std, dtype), ReLU()]
            width = size
        input_shape = None
    else:
        channels, height, width_px = config.image_shape
        if channels * height * width_px != input_dim:
            raise ConfigError(f"image_shape {config.image_shape} does not match {input_dim} input values")
        for filters in config.conv_filters:
            conv = ConvLayer(channels, filters, config.conv_kernel, rng=rng, init_std=std, dtype=dtype)
            height, width_px = conv.output_size(height, width_px)
            if height % 2 or width_px % 2:
                raise ConfigError(f"pooling needs even feature maps, got {height}x{width_px}")
            layers += [conv, ReLU(), MaxPool2x2()]
            channels, height, width_px = filters, height // 2, width_px // 2
        layers += [Flatten(), DenseLayer(channels * height * width_px, config.penultimate, rng, std, dtype), ReLU()]
        width = config.penultimate
        input_shape = tuple(config.image_shape)
    if config.dropout:
        layers.append(Dropout(config.dropout))
    spec = head_spec(config, width, num_classes)
    weights = HeadWeights.init(width, num_classes, rng, std, dtype)
    return Network(layers, spec, weights, input_shape)


def check_tiny(config: RunConfig, limit: int = 16) -> None:
    if config.architecture == "convnet":
        sizes = list(config.conv_filters) + [config.penultimate] + list(config.image_shape[1:])
    else:
        sizes = list(config.hidden)
    if max(sizes) > limit:
        raise ConfigError(f"gradcheck needs layer sizes <= {limit}, got {sizes}")


def config_from_echo(echo: dict) -> RunConfig:
    """Rebuild the config stored in a model manifest."""
    values = {key: _coerce(key, item["value"]) for key, item in echo.items() if item["source"] != "fixed"}
    config = RunConfig(**values)
    config.explicit = {key for key, item in echo.items() if item["source"] == "config"}
    return config.validate()
