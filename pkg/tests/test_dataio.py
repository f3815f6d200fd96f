import numpy as np
import pytest

from dlsvm import dataio
from dlsvm.dataio import Dataset
from dlsvm.errors import BadMagicError, CountMismatchError, DomainError, TruncatedPayloadError


@pytest.fixture
def idx_files(tmp_path):
    images = np.array([[[0, 255], [128, 64]], [[1, 2], [3, 4]]], dtype=np.uint8)
    labels = np.array([7, 3], dtype=np.uint8)
    images_path = str(tmp_path / "images-idx3-ubyte")
    labels_path = str(tmp_path / "labels-idx1-ubyte")
    dataio.write_idx(images_path, images)
    dataio.write_idx(labels_path, labels)
    return images, labels, images_path, labels_path


class TestIdx:
    def test_round_trip(self, idx_files):
        images, labels, images_path, labels_path = idx_files
        np.testing.assert_array_equal(dataio.read_idx(images_path, dataio.IDX_IMAGES_MAGIC), images)
        dataset = dataio.load_idx(images_path, labels_path)
        assert dataset.inputs.shape == (2, 4)
        np.testing.assert_array_equal(dataset.inputs, images.reshape(2, 4) / 255.0)
        np.testing.assert_array_equal(dataset.labels, [7, 3])
        assert dataset.num_classes == 8

    def test_gzip_is_transparent(self, tmp_path):
        labels = np.arange(10, dtype=np.uint8)
        path = str(tmp_path / "labels.gz")
        dataio.write_idx(path, labels)
        np.testing.assert_array_equal(dataio.read_idx(path, dataio.IDX_LABELS_MAGIC), labels)

    def test_swapped_files_rejected(self, idx_files):
        _, _, images_path, labels_path = idx_files
        with pytest.raises(BadMagicError):
            dataio.load_idx(labels_path, images_path)

    def test_truncated_payload(self, idx_files):
        _, _, images_path, _ = idx_files
        with open(images_path, "rb") as f:
            raw = f.read()
        with open(images_path, "wb") as f:
            f.write(raw[:-3])
        with pytest.raises(TruncatedPayloadError):
            dataio.read_idx(images_path, dataio.IDX_IMAGES_MAGIC)

    def test_count_mismatch(self, tmp_path, idx_files):
        _, _, images_path, _ = idx_files
        labels_path = str(tmp_path / "three-labels")
        dataio.write_idx(labels_path, np.array([1, 2, 3], dtype=np.uint8))
        with pytest.raises(CountMismatchError):
            dataio.load_idx(images_path, labels_path)


def test_cifar_records(tmp_path):
    rng = np.random.default_rng(0)
    pixels = rng.integers(0, 256, size=(2, 3072), dtype=np.uint8)
    records = np.hstack([np.array([[4], [9]], dtype=np.uint8), pixels])
    path = tmp_path / "data_batch_1.bin"
    path.write_bytes(records.tobytes())
    dataset = dataio.load_cifar([str(path)])
    assert dataset.inputs.shape == (2, 3, 32, 32)
    np.testing.assert_array_equal(dataset.labels, [4, 9])
    np.testing.assert_allclose(dataset.inputs[1, 0, 0, :3], pixels[1, :3] / 255.0)


class TestBlobs:
    def test_balanced(self, rng):
        dataset = dataio.make_blobs(100, 4, 3, 20.0, rng)
        np.testing.assert_array_equal(np.bincount(dataset.labels), [25, 25, 25, 25])

    def test_deterministic(self):
        a = dataio.make_blobs(50, 3, 2, 20.0, np.random.default_rng(7))
        b = dataio.make_blobs(50, 3, 2, 20.0, np.random.default_rng(7))
        np.testing.assert_array_equal(a.inputs, b.inputs)
        np.testing.assert_array_equal(a.labels, b.labels)

    def test_centres_are_separated(self, rng):
        dataset = dataio.make_blobs(400, 4, 2, 20.0, rng)
        centres = np.stack([dataset.inputs[dataset.labels == k].mean(axis=0) for k in range(4)])
        gaps = np.linalg.norm(centres[:, None] - centres[None, :], axis=-1)[np.triu_indices(4, 1)]
        assert np.all(gaps > 18.0)

    def test_linearly_separable(self, rng):
        dataset = dataio.make_blobs(200, 2, 5, 20.0, rng)
        X = np.hstack([dataset.inputs, np.ones((len(dataset), 1))])
        y = np.where(dataset.labels == 1, 1.0, -1.0)
        w = np.zeros(X.shape[1])
        for _ in range(1000):
            mistakes = 0
            for xi, yi in zip(X, y):
                if yi * (xi @ w) <= 0:
                    w += yi * xi
                    mistakes += 1
            if not mistakes:
                break
        assert np.all(y * (X @ w) > 0)


class TestMinibatches:
    def test_full_mnist_plan(self, rng):
        assert dataio.minibatches(60000, 200, rng).num_batches == 300

    def test_remainder(self, rng):
        sizes = [len(b) for b in dataio.minibatches(10, 3, rng)]
        assert sizes == [3, 3, 3, 1]

    def test_partition(self, rng):
        seen = np.concatenate(list(dataio.minibatches(57, 8, rng)))
        np.testing.assert_array_equal(np.sort(seen), np.arange(57))

    def test_batch_larger_than_dataset(self, rng):
        with pytest.raises(DomainError):
            dataio.minibatches(5, 6, rng)

    def test_accepts_a_dataset(self, rng):
        dataset = Dataset(np.zeros((7, 2)), np.zeros(7))
        assert len(dataio.minibatches(dataset, 7, rng)) == 1


class TestKfold:
    def test_partition(self, rng):
        folds = dataio.kfold(23, 4, rng)
        assert len(folds) == 4
        validation = np.concatenate([val for _, val in folds])
        np.testing.assert_array_equal(np.sort(validation), np.arange(23))
        for train_idx, val_idx in folds:
            assert not set(train_idx) & set(val_idx)
            assert len(train_idx) + len(val_idx) == 23

    def test_too_many_folds(self, rng):
        with pytest.raises(DomainError):
            dataio.kfold(3, 4, rng)


def test_dataset_rejects_labels_out_of_range():
    with pytest.raises(DomainError):
        Dataset(np.zeros((2, 1)), np.array([0, 2]), num_classes=2)
