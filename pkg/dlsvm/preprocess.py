"""
Data preprocessing and augmentation.

PCA projection, the face pipeline normalisation (per-image mean removal and
norm 100, then per-pixel standardisation), and mirror/jitter augmentation.
Statistics are always fit on the training split only.
"""

import logging
from dataclasses import dataclass

import numpy as np

from dlsvm import tensor
from dlsvm.errors import DegenerateInputError, DomainError, ShapeError

logger = logging.getLogger(__name__)

FACE_NORM = 100.0
STD_FLOOR = 1e-8


@dataclass
class PcaModel:
    """
    Attributes:
        mean (np.ndarray): D vector removed before projection.
        components (np.ndarray): D x d, orthonormal columns, leading direction first.
        explained_variances (np.ndarray): d eigenvalues, non-increasing.
    """

    mean: np.ndarray
    components: np.ndarray
    explained_variances: np.ndarray

    @property
    def dims(self) -> int:
        return self.components.shape[1]


def pca_fit(X: np.ndarray, d: int) -> PcaModel:
    """
    Eigendecomposition of the population covariance (divide by N), no whitening.
    Each component is signed so its largest-magnitude entry is positive.
    """
    if X.ndim != 2:
        raise ShapeError(f"pca_fit expects N x D data, got {X.shape}")
    n, D = X.shape
    if d < 1 or d > D:
        raise DomainError(f"cannot keep {d} components of {D}-dimensional data")
    if n <= d:
        raise DomainError(f"pca_fit needs more rows than components ({n} <= {d})")
    tensor.check_finite(X, "pca data")
    mean = X.mean(axis=0)
    centered = X - mean
    covariance = centered.T @ centered / n
    eigenvalues, eigenvectors = np.linalg.eigh(covariance)
    # eigh is ascending
    order = np.argsort(eigenvalues)[::-1][:d]
    variances = np.clip(eigenvalues[order], 0, None)
    components = eigenvectors[:, order]
    pivots = np.argmax(np.abs(components), axis=0)
    signs = np.sign(components[pivots, np.arange(d)])
    signs[signs == 0] = 1
    components = components * signs

    tol = max(variances[0], 0) * D * np.finfo(X.dtype).eps
    rank = int(np.sum(eigenvalues > tol))
    if rank < d:
        logger.warning("data has rank %d < %d requested components; keeping zero-variance directions", rank, d)
    return PcaModel(mean=mean, components=components, explained_variances=variances)


def pca_transform(model: PcaModel, X: np.ndarray) -> np.ndarray:
    if X.ndim != 2 or X.shape[1] != model.mean.shape[0]:
        raise ShapeError(f"pca model expects N x {model.mean.shape[0]} data, got {X.shape}")
    return (X - model.mean) @ model.components


def pca_inverse_transform(model: PcaModel, Z: np.ndarray) -> np.ndarray:
    if Z.ndim != 2 or Z.shape[1] != model.dims:
        raise ShapeError(f"pca model expects N x {model.dims} codes, got {Z.shape}")
    return Z @ model.components.T + model.mean


def face_normalize(image: np.ndarray) -> np.ndarray:
    """
    Remove the image mean, then scale to norm 100.
    Accepts one flat image or a batch of flat images (one per row).
    """
    x = np.atleast_2d(image)
    centered = x - x.mean(axis=1, keepdims=True)
    norms = np.linalg.norm(centered, axis=1, keepdims=True)
    if np.any(norms == 0):
        raise DegenerateInputError("cannot normalise a constant image")
    out = FACE_NORM * centered / norms
    return out[0] if image.ndim == 1 else out


@dataclass
class PixelStandardizer:
    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, X: np.ndarray, floor: float = STD_FLOOR) -> "PixelStandardizer":
        tensor.check_finite(X, "standardisation data")
        # population std
        return cls(mean=X.mean(axis=0), std=np.maximum(X.std(axis=0), floor))

    def apply(self, X: np.ndarray) -> np.ndarray:
        if X.ndim != 2 or X.shape[1] != self.mean.shape[0]:
            raise ShapeError(f"standardizer expects N x {self.mean.shape[0]} data, got {X.shape}")
        return (X - self.mean) / self.std


def pixel_standardize_fit(X: np.ndarray, floor: float = STD_FLOOR) -> PixelStandardizer:
    return PixelStandardizer.fit(X, floor)


def pixel_standardize_apply(standardizer: PixelStandardizer, X: np.ndarray) -> np.ndarray:
    return standardizer.apply(X)


def mirror(image: np.ndarray) -> np.ndarray:
    """Horizontal reflection of a C x H x W image."""
    return image[..., ::-1]


def shift(image: np.ndarray, dy: int, dx: int) -> np.ndarray:
    """Translate a C x H x W image by (dy, dx) pixels, zero-filling exposed borders."""
    _, h, w = image.shape
    out = np.zeros_like(image)
    src_y = slice(max(0, -dy), min(h, h - dy))
    dst_y = slice(max(0, dy), min(h, h + dy))
    src_x = slice(max(0, -dx), min(w, w - dx))
    dst_x = slice(max(0, dx), min(w, w + dx))
    out[:, dst_y, dst_x] = image[:, src_y, src_x]
    return out


def augment(images: np.ndarray, rng: np.random.Generator, max_jitter: int = 2, mirror_prob: float = 0.5) -> np.ndarray:
    """
    Random horizontal reflection and integer jitter, independently per image.

    Args:
        images (np.ndarray): N x C x H x W minibatch.
        rng (np.random.Generator): Run generator.
        max_jitter (int): Offsets are uniform in [-max_jitter, max_jitter] on both axes.
        mirror_prob (float): Probability of reflecting an image.

    Returns:
        np.ndarray: Augmented copy, same shape.
    """
    if images.ndim != 4:
        raise ShapeError(f"augment expects N x C x H x W images, got {images.shape}")
    if max_jitter < 0 or max_jitter >= min(images.shape[2], images.shape[3]):
        raise DomainError(f"max_jitter {max_jitter} does not fit {images.shape[2]}x{images.shape[3]} images")
    out = np.empty_like(images)
    for i, image in enumerate(images):
        if rng.random() < mirror_prob:
            image = mirror(image)
        dy, dx = rng.integers(-max_jitter, max_jitter + 1, size=2) if max_jitter else (0, 0)
        out[i] = shift(image, int(dy), int(dx)) if (dy or dx) else image
    return out


class Pipeline:
    """
    Preprocessing chain applied to flat N x D inputs:
    face normalisation -> pixel standardisation -> PCA, each optional.
    """

    def __init__(self, face: bool = False, standardize: bool = False, pca_dims: int = 0) -> None:
        self.face = face
        self.standardize = standardize
        self.pca_dims = pca_dims
        self.standardizer: PixelStandardizer | None = None
        self.pca: PcaModel | None = None

    def fit(self, X: np.ndarray) -> "Pipeline":
        X = self._flat(X)
        if self.face:
            X = face_normalize(X)
        if self.standardize:
            self.standardizer = PixelStandardizer.fit(X)
            X = self.standardizer.apply(X)
        if self.pca_dims:
            self.pca = pca_fit(X, self.pca_dims)
            logger.info(
                "pca %d -> %d dims, %.1f%% of variance kept",
                X.shape[1],
                self.pca_dims,
                100 * self.pca.explained_variances.sum() / max(X.var(axis=0).sum(), 1e-300),
            )
        return self

    def apply(self, X: np.ndarray) -> np.ndarray:
        X = self._flat(X)
        if self.face:
            X = face_normalize(X)
        if self.standardize:
            X = self.standardizer.apply(X)
        if self.pca_dims:
            X = pca_transform(self.pca, X)
        return X

    @staticmethod
    def _flat(X: np.ndarray) -> np.ndarray:
        return X.reshape(X.shape[0], -1)

    def tensors(self) -> dict[str, np.ndarray]:
        """Fitted statistics, named for the model artifact."""
        out = {}
        if self.standardizer is not None:
            out["standardizer.mean"] = self.standardizer.mean
            out["standardizer.std"] = self.standardizer.std
        if self.pca is not None:
            out["pca.mean"] = self.pca.mean
            out["pca.components"] = self.pca.components
            out["pca.explained_variances"] = self.pca.explained_variances
        return out

    def load_tensors(self, tensors: dict[str, np.ndarray]) -> "Pipeline":
        if self.standardize:
            self.standardizer = PixelStandardizer(tensors["standardizer.mean"], tensors["standardizer.std"])
        if self.pca_dims:
            self.pca = PcaModel(
                tensors["pca.mean"], tensors["pca.components"], tensors["pca.explained_variances"]
            )
        return self
