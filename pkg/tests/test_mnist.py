import os

import numpy as np
import pytest

from conftest import mnist_path, needs_mnist
from dlsvm import harness, utils

CONFIG_DIR = os.path.join(os.path.dirname(__file__), os.pardir, "config")


def desk_config(tmp_path, **overrides) -> utils.RunConfig:
    config = utils.load_config(os.path.join(CONFIG_DIR, "mnist_desk.yaml"))
    return config.override(
        train_images=mnist_path("train-images-idx3-ubyte"),
        train_labels=mnist_path("train-labels-idx1-ubyte"),
        test_images=mnist_path("t10k-images-idx3-ubyte"),
        test_labels=mnist_path("t10k-labels-idx1-ubyte"),
        **overrides,
    )


@needs_mnist
def test_official_files_load(tmp_path):
    train_set, test_set = harness.load_datasets(desk_config(tmp_path, train_subset=0))
    assert train_set.inputs.shape == (60000, 784)
    assert test_set.inputs.shape == (10000, 784)
    np.testing.assert_array_equal(np.unique(train_set.labels), np.arange(10))
    assert 0.0 <= train_set.inputs.min() and train_set.inputs.max() <= 1.0


@needs_mnist
@pytest.mark.slow
def test_desk_scale_heads(tmp_path):
    """Both heads learn MNIST; the L2-SVM head is no worse on average and wins its own objective."""
    errors = {"softmax": [], "l2svm": []}
    reports = {"softmax": [], "l2svm": []}
    for seed in range(5):
        for head in errors:
            config = desk_config(tmp_path, head=head, seed=seed, out_dir=str(tmp_path / f"{head}-{seed}"))
            result = harness.train(config)
            errors[head].append(result.test_report.error_pct)
            reports[head].append(result.train_report)

    assert max(errors["softmax"]) <= 5.0
    assert max(errors["l2svm"]) <= 5.0
    assert np.mean(errors["l2svm"]) <= np.mean(errors["softmax"])
    inversions = sum(
        s.avg_xent < l.avg_xent and l.hinge_sq_sum < s.hinge_sq_sum
        for s, l in zip(reports["softmax"], reports["l2svm"])
    )
    assert inversions >= 4


@needs_mnist
@pytest.mark.slow
def test_same_seed_same_metrics(tmp_path):
    outputs = []
    for name in ("a", "b"):
        config = desk_config(tmp_path, epochs=3, out_dir=str(tmp_path / name))
        harness.train(config)
        with open(os.path.join(config.out_dir, "metrics.csv"), "rb") as f:
            outputs.append(f.read())
    assert outputs[0] == outputs[1]


@needs_mnist
@pytest.mark.slow
def test_softmax_warm_start_drifts_away_from_l2svm(tmp_path):
    """Softmax training picked up from the best L2-SVM model ends no better than where it started."""
    sources = []
    for seed in range(5):
        config = desk_config(tmp_path, head="l2svm", seed=seed, out_dir=str(tmp_path / f"l2svm-{seed}"))
        sources.append((harness.train(config).test_report.error_pct, config.out_dir))
    _, best_dir = min(sources)

    drifted = 0
    for seed in range(5):
        config = desk_config(tmp_path, head="softmax", seed=seed, out_dir=str(tmp_path / f"warm-{seed}"))
        result = harness.warm_start(os.path.join(best_dir, "model"), "softmax", config)
        start = result.records[0].test_error_pct
        drifted += result.test_report.error_pct >= start
    assert drifted >= 3
