# Example (manifest.json):
# {
#     "format": "dlsvm-model",
#     "version": 1,
#     "head": "l2svm",
#     "num_classes": 10,
#     "input_dim": 70,
#     "warm_started": false,
#     "byte_order": "<f8",
#     "tensors": [
#         {"name": "0.dense.weights", "shape": [70, 512], "offset": 0},
#         {"name": "0.dense.bias", "shape": [512], "offset": 35840},
#         ...
#         {"name": "pca.components", "shape": [784, 70], "offset": 322582}
#     ],
#     "config": {"momentum": {"value": 0.9, "source": "default", "artifact_default": true}, ...}
# }
# Offsets count float64 values, not bytes.

import json
import logging
import os

import numpy as np

from dlsvm import tensor, utils
from dlsvm.errors import ShapeError
from dlsvm.model import Network
from dlsvm.preprocess import Pipeline

logger = logging.getLogger(__name__)

FORMAT = "dlsvm-model"
VERSION = 1
BYTE_ORDER = "<f8"
MANIFEST = "manifest.json"
PARAMS = "params.bin"


def write(
    dir: str,
    network: Network,
    pipeline: Pipeline,
    config: utils.RunConfig,
    input_dim: int,
    warm_started: bool = False,
) -> bool:
    os.makedirs(dir, exist_ok=True)
    named = network.parameters() + list(pipeline.tensors().items())
    entries, blobs, offset = [], [], 0
    for name, value in named:
        entries.append({"name": name, "shape": list(value.shape), "offset": offset})
        blobs.append(np.ascontiguousarray(value, dtype=BYTE_ORDER).ravel())
        offset += value.size
    manifest = {
        "format": FORMAT,
        "version": VERSION,
        "head": network.kind.value,
        "num_classes": network.head_spec.num_classes,
        "input_dim": input_dim,
        "warm_started": warm_started,
        "byte_order": BYTE_ORDER,
        "tensors": entries,
        "config": config.echo(),
    }
    np.concatenate(blobs).tofile(os.path.join(dir, PARAMS))
    with open(os.path.join(dir, MANIFEST), "w", encoding="utf-8") as f:
        json.dump(manifest, f, indent=4, default=list)
    logger.info("saved model (%d tensors, %d values) to %s", len(entries), offset, dir)
    return True


def read(dir: str) -> tuple[Network, Pipeline, dict]:
    """
    Load a model artifact.

    Returns:
        tuple[Network, Pipeline, dict]: The network with its stored weights,
        the fitted preprocessing chain, and the raw manifest.
    """
    with open(os.path.join(dir, MANIFEST), "r", encoding="utf-8") as f:
        manifest = json.load(f)
    values = np.fromfile(os.path.join(dir, PARAMS), dtype=BYTE_ORDER)
    tensors = {}
    for entry in manifest["tensors"]:
        shape = tuple(entry["shape"])
        start = entry["offset"]
        stop = start + int(np.prod(shape, dtype=np.int64))
        if stop > values.size:
            raise ShapeError(f"{dir}: tensor {entry['name']} {shape} runs past the end of {PARAMS}")
        tensors[entry["name"]] = tensor.as_tensor(values[start:stop], shape)

    config = utils.config_from_echo(manifest["config"])
    network = utils.build_network(
        config, manifest["input_dim"], manifest["num_classes"], np.random.default_rng(0)
    )
    network.load_parameters(tensors)
    pipeline = utils.build_pipeline(config).load_tensors(tensors)
    logger.info("loaded %s from %s", network, dir)
    return network, pipeline, manifest
