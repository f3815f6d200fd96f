"""
Dataset ingestion and minibatching.

IDX (MNIST) and CIFAR-10 binary readers, an IDX writer for fixtures,
Gaussian blob generator, seeded shuffling, minibatch plans and k-fold splits.
Pixels are scaled to [0, 1] on load.
"""

import gzip
import logging
import os
from dataclasses import dataclass, field

import numpy as np

from dlsvm.errors import BadMagicError, CountMismatchError, DomainError, ShapeError, TruncatedPayloadError

logger = logging.getLogger(__name__)

IDX_LABELS_MAGIC = 2049
IDX_IMAGES_MAGIC = 2051
CIFAR_SHAPE = (3, 32, 32)


@dataclass
class Dataset:
    """
    Attributes:
        inputs (np.ndarray): N x D, or N x C x H x W in image form.
        labels (np.ndarray): N integers in [0, num_classes).
        split (str): train, val or test.
        num_classes (int): K.
    """

    inputs: np.ndarray
    labels: np.ndarray
    split: str = "train"
    num_classes: int = field(default=0)

    def __post_init__(self) -> None:
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.inputs.shape[0] != self.labels.shape[0]:
            raise ShapeError(f"{self.inputs.shape[0]} inputs but {self.labels.shape[0]} labels")
        if self.split not in ("train", "val", "test"):
            raise DomainError(f"unknown split {self.split!r}")
        if not self.num_classes:
            self.num_classes = int(self.labels.max()) + 1 if self.labels.size else 0
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.num_classes):
            raise DomainError(f"labels must lie in [0, {self.num_classes})")

    def __len__(self) -> int:
        return self.labels.shape[0]

    def __str__(self) -> str:
        return f"Dataset({self.split}, {len(self)} x {self.inputs.shape[1:]}, {self.num_classes} classes)"

    def subset(self, indices: np.ndarray, split: str | None = None) -> "Dataset":
        return Dataset(self.inputs[indices], self.labels[indices], split or self.split, self.num_classes)


def _open(path: str):
    with open(path, "rb") as f:
        compressed = f.read(2) == b"\x1f\x8b"
    return gzip.open(path, "rb") if compressed else open(path, "rb")


def read_idx(path: str, expected_magic: int) -> np.ndarray:
    """
    Parse one IDX file (gzip accepted transparently).

    Returns:
        np.ndarray: The unsigned-byte payload in its declared shape.
    """
    with _open(path) as f:
        raw = f.read()
    if len(raw) < 4:
        raise TruncatedPayloadError(f"{path}: file too short for an IDX header")
    magic = int.from_bytes(raw[:4], "big")
    if magic != expected_magic:
        raise BadMagicError(f"{path}: magic {magic}, expected {expected_magic}")
    ndim = raw[3]
    header = 4 + 4 * ndim
    if len(raw) < header:
        raise TruncatedPayloadError(f"{path}: header declares {ndim} dims but the file ends early")
    dims = tuple(int(d) for d in np.frombuffer(raw, dtype=">u4", count=ndim, offset=4))
    size = int(np.prod(dims))
    if len(raw) - header < size:
        raise TruncatedPayloadError(f"{path}: payload has {len(raw) - header} bytes, dims {dims} need {size}")
    return np.frombuffer(raw, dtype=np.uint8, count=size, offset=header).reshape(dims)


def write_idx(path: str, array: np.ndarray) -> None:
    """Write unsigned bytes as IDX (magic 2049 for 1-d labels, 2051 for 3-d images)."""
    array = np.asarray(array, dtype=np.uint8)
    magic = {1: IDX_LABELS_MAGIC, 3: IDX_IMAGES_MAGIC}.get(array.ndim)
    if magic is None:
        raise ShapeError(f"IDX writer handles 1-d labels or 3-d images, got {array.shape}")
    header = magic.to_bytes(4, "big") + b"".join(d.to_bytes(4, "big") for d in array.shape)
    opener = gzip.open if path.endswith(".gz") else open
    with opener(path, "wb") as f:
        f.write(header + array.tobytes())


def load_idx(images_path: str, labels_path: str, split: str = "train") -> Dataset:
    images = read_idx(images_path, IDX_IMAGES_MAGIC)
    labels = read_idx(labels_path, IDX_LABELS_MAGIC)
    if images.ndim != 3 or labels.ndim != 1:
        raise ShapeError(f"IDX images must be 3-d and labels 1-d, got {images.shape} and {labels.shape}")
    if images.shape[0] != labels.shape[0]:
        raise CountMismatchError(f"{images.shape[0]} images but {labels.shape[0]} labels")
    inputs = images.reshape(images.shape[0], -1).astype(np.float64) / 255.0
    dataset = Dataset(inputs, labels.astype(np.int64), split, num_classes=int(labels.max()) + 1)
    logger.info("loaded %s from %s", dataset, images_path)
    return dataset


def load_cifar(paths: list[str], split: str = "train") -> Dataset:
    """CIFAR-10 binary batches: each record is 1 label byte and 3072 pixel bytes."""
    record = 1 + int(np.prod(CIFAR_SHAPE))
    inputs, labels = [], []
    for path in paths:
        with _open(path) as f:
            raw = np.frombuffer(f.read(), dtype=np.uint8)
        if raw.size % record:
            raise TruncatedPayloadError(f"{path}: {raw.size} bytes is not a whole number of records")
        rows = raw.reshape(-1, record)
        labels.append(rows[:, 0].astype(np.int64))
        inputs.append(rows[:, 1:].reshape((-1,) + CIFAR_SHAPE).astype(np.float64) / 255.0)
    dataset = Dataset(np.concatenate(inputs), np.concatenate(labels), split, num_classes=10)
    logger.info("loaded %s from %d batch file(s)", dataset, len(paths))
    return dataset


def make_blobs(N: int, K: int, D: int, separation: float, rng: np.random.Generator, split: str = "train") -> Dataset:
    """
    K unit-variance Gaussian clusters, centres pairwise at least `separation`
    apart, N // K points per class (the first N % K classes get one more).
    """
    if K < 2:
        raise DomainError(f"make_blobs needs K >= 2, got {K}")
    if D >= K:
        # scaled basis vectors are exactly `separation` apart
        centers = np.zeros((K, D))
        centers[np.arange(K), np.arange(K)] = separation / np.sqrt(2)
    else:
        centers = _spread_centers(K, D, separation, rng)
    counts = np.full(K, N // K)
    counts[: N % K] += 1
    labels = np.repeat(np.arange(K), counts)
    inputs = centers[labels] + rng.standard_normal((N, D))
    order = rng.permutation(N)
    return Dataset(inputs[order], labels[order], split, num_classes=K)


def _spread_centers(K: int, D: int, separation: float, rng: np.random.Generator) -> np.ndarray:
    side = separation * K
    for _ in range(10000):
        centers = rng.uniform(0, side, size=(K, D))
        gaps = np.linalg.norm(centers[:, None] - centers[None, :], axis=-1)
        if np.all(gaps[np.triu_indices(K, 1)] >= separation):
            return centers
    raise DomainError(f"could not place {K} centres {separation} apart in {D} dims")


@dataclass
class MinibatchPlan:
    permutation: np.ndarray
    batch_size: int

    @property
    def num_batches(self) -> int:
        return -(-self.permutation.size // self.batch_size)

    def __iter__(self):
        for start in range(0, self.permutation.size, self.batch_size):
            yield self.permutation[start : start + self.batch_size]

    def __len__(self) -> int:
        return self.num_batches


def minibatches(dataset: Dataset | int, B: int, rng: np.random.Generator) -> MinibatchPlan:
    """
    Fresh permutation for one epoch. The last batch keeps the remainder.

    Args:
        dataset (Dataset | int): The dataset, or just its size.
        B (int): Batch size.
        rng (np.random.Generator): Run generator.
    """
    n = dataset if isinstance(dataset, int) else len(dataset)
    if B < 1:
        raise DomainError(f"batch size must be >= 1, got {B}")
    if B > n:
        raise DomainError(f"batch size {B} exceeds dataset size {n}")
    return MinibatchPlan(permutation=rng.permutation(n), batch_size=B)


def kfold(N: int, k: int, rng: np.random.Generator) -> list[tuple[np.ndarray, np.ndarray]]:
    """Seeded k-fold partition; returns (train indices, validation indices) per fold."""
    if not 2 <= k <= N:
        raise DomainError(f"k-fold needs 2 <= k <= N, got k={k}, N={N}")
    folds = np.array_split(rng.permutation(N), k)
    return [
        (np.sort(np.concatenate(folds[:i] + folds[i + 1 :])), np.sort(fold))
        for i, fold in enumerate(folds)
    ]


def check_paths(*paths: str) -> None:
    missing = [p for p in paths if not os.path.exists(p)]
    if missing:
        raise FileNotFoundError(f"missing data file(s): {', '.join(missing)}")
