import os

import numpy as np
import pytest

from dlsvm import utils
from dlsvm.errors import ConfigError
from dlsvm.layers import ConvLayer, DenseLayer, Dropout, MaxPool2x2
from dlsvm.preprocess import STD_FLOOR
from dlsvm.utils import RunConfig

CONFIG_DIR = os.path.join(os.path.dirname(__file__), os.pardir, "config")


def write_config(tmp_path, text: str) -> str:
    path = tmp_path / "run.yaml"
    path.write_text(text, encoding="utf-8")
    return str(path)


class TestLoadConfig:
    def test_values_and_defaults(self, tmp_path):
        config = utils.load_config(write_config(tmp_path, "head: softmax\nhidden: [16, 8]\nepochs: 3\n"))
        assert config.head == "softmax"
        assert config.hidden == [16, 8]
        assert config.epochs == 3
        assert config.batch_size == RunConfig().batch_size

    def test_unknown_key(self, tmp_path):
        with pytest.raises(ConfigError, match="learning_rate"):
            utils.load_config(write_config(tmp_path, "learning_rate: 0.1\n"))

    def test_wrong_type(self, tmp_path):
        with pytest.raises(ConfigError):
            utils.load_config(write_config(tmp_path, "epochs: many\n"))

    def test_bool_is_not_an_int(self, tmp_path):
        with pytest.raises(ConfigError):
            utils.load_config(write_config(tmp_path, "epochs: true\n"))

    def test_int_accepted_for_float(self, tmp_path):
        assert utils.load_config(write_config(tmp_path, "C: 1\n")).C == 1.0

    def test_exponent_without_dot(self, tmp_path):
        assert utils.load_config(write_config(tmp_path, "gradcheck_eps: 1e-5\n")).gradcheck_eps == 1e-5

    def test_out_of_range(self, tmp_path):
        with pytest.raises(ConfigError):
            utils.load_config(write_config(tmp_path, "head: l2svm\nC: 0.0\n"))

    def test_empty_file_is_all_defaults(self, tmp_path):
        assert utils.load_config(write_config(tmp_path, "")) == RunConfig()

    def test_not_a_mapping(self, tmp_path):
        with pytest.raises(ConfigError):
            utils.load_config(write_config(tmp_path, "- a\n- b\n"))

    @pytest.mark.parametrize("name", ["blobs.yaml", "mnist.yaml", "mnist_desk.yaml", "cifar.yaml", "gradcheck.yaml"])
    def test_shipped_configs_are_valid(self, name):
        utils.load_config(os.path.join(CONFIG_DIR, name))


class TestEcho:
    def test_marks_unstated_defaults(self, tmp_path):
        echo = utils.load_config(write_config(tmp_path, "lr_start: 0.2\n")).echo()
        assert echo["lr_start"] == {"value": 0.2, "source": "config", "artifact_default": False}
        assert echo["momentum"]["artifact_default"] is True
        assert echo["epochs"]["artifact_default"] is False

    def test_explicit_momentum_is_not_flagged(self, tmp_path):
        echo = utils.load_config(write_config(tmp_path, "momentum: 0.5\n")).echo()
        assert echo["momentum"]["artifact_default"] is False

    def test_fixed_values_are_flagged(self):
        echo = RunConfig(conv_kernel=5).echo()
        assert echo["pixel_std_floor"] == {"value": STD_FLOOR, "source": "fixed", "artifact_default": True}
        assert echo["conv_padding"] == {"value": 2, "source": "fixed", "artifact_default": True}

    def test_round_trip(self, tmp_path):
        config = utils.load_config(write_config(tmp_path, "head: l1svm\nhidden: [4]\n"))
        restored = utils.config_from_echo(config.echo())
        assert restored == config
        assert restored.explicit == {"head", "hidden"}


class TestOverride:
    def test_none_is_ignored(self):
        config = RunConfig().override(seed=None, out_dir="runs/x")
        assert config.seed == 0
        assert config.out_dir == "runs/x"
        assert "out_dir" in config.explicit

    def test_validated(self):
        with pytest.raises(ConfigError):
            RunConfig().override(head="hinge")


class TestBuildNetwork:
    def test_mlp(self, rng):
        config = RunConfig(hidden=[5, 4], dropout=0.1)
        network = utils.build_network(config, 7, 3, rng)
        dense = [layer for layer in network.layers if isinstance(layer, DenseLayer)]
        assert [(d.in_dim, d.out_dim) for d in dense] == [(7, 5), (5, 4)]
        assert isinstance(network.layers[-1], Dropout)
        assert network.head_weights.W.shape == (5, 3)
        np.testing.assert_array_equal(network.head_weights.W[-1], 0)

    def test_convnet_topology(self, rng):
        config = RunConfig(architecture="convnet", image_shape=[1, 8, 8], conv_filters=[2, 3], conv_kernel=3, penultimate=6)
        network = utils.build_network(config, 64, 4, rng)
        assert sum(isinstance(layer, ConvLayer) for layer in network.layers) == 2
        assert sum(isinstance(layer, MaxPool2x2) for layer in network.layers) == 2
        assert network.predict(rng.standard_normal((3, 64))).shape == (3,)

    def test_cifar_topology_scores_a_batch(self, rng):
        config = utils.load_config(os.path.join(CONFIG_DIR, "cifar.yaml"))
        network = utils.build_network(config, 3072, 10, rng)
        convs = [layer for layer in network.layers if isinstance(layer, ConvLayer)]
        assert [c.filters.shape for c in convs] == [(32, 3, 5, 5), (64, 32, 5, 5)]
        assert sum(isinstance(layer, MaxPool2x2) for layer in network.layers) == 2
        dense = [layer for layer in network.layers if isinstance(layer, DenseLayer)]
        assert [(d.in_dim, d.out_dim) for d in dense] == [(64 * 8 * 8, 3072)]
        assert network.layers[-1].rate == pytest.approx(0.2)
        assert network.head_weights.W.shape == (3073, 10)

        x = rng.random((2, 3072))
        labels = np.array([3, 7])
        assert network.scores(x).shape == (2, 10)
        assert np.isfinite(network.loss(x, labels).loss)
        assert np.isfinite(network.loss(x, labels, train=True, rng=rng).loss)

    def test_convnet_odd_feature_map(self, rng):
        config = RunConfig(architecture="convnet", image_shape=[1, 6, 6], conv_filters=[2, 2], conv_kernel=3, penultimate=4)
        with pytest.raises(ConfigError):
            utils.build_network(config, 36, 2, rng)

    def test_image_shape_must_match_input(self, rng):
        config = RunConfig(architecture="convnet", image_shape=[1, 8, 8], conv_filters=[2], conv_kernel=3)
        with pytest.raises(ConfigError):
            utils.build_network(config, 65, 2, rng)

    def test_float32(self, rng):
        network = utils.build_network(RunConfig(hidden=[3], dtype="float32"), 4, 2, rng)
        assert all(value.dtype == np.float32 for _, value in network.parameters())


def test_run_seeds_are_reproducible():
    a_init, a_train = utils.run_seeds(3)
    b_init, b_train = utils.run_seeds(3)
    assert a_init.random() == b_init.random()
    assert a_train.random() == b_train.random()


def test_check_tiny():
    utils.check_tiny(RunConfig(hidden=[16, 4]))
    with pytest.raises(ConfigError):
        utils.check_tiny(RunConfig(hidden=[17]))
