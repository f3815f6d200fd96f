"""
Experiment driver.

Loads data, trains a network under one head with SGD + momentum, evaluates
every model under all three objectives, averages ensembles, runs the
finite-difference suite and k-fold cross validation. Outputs go through
dlsvm.generator.
"""

import logging
import os
from dataclasses import asdict, dataclass, field

import numpy as np

from dlsvm import gradcheck as checks
from dlsvm import head as heads
from dlsvm import utils
from dlsvm.dataio import Dataset, check_paths, kfold, load_cifar, load_idx, make_blobs, minibatches
from dlsvm.errors import ConfigError, DivergenceError, DomainError
from dlsvm.generator import artifact, metrics, report
from dlsvm.head import HeadKind
from dlsvm.layers import ConvLayer, DenseLayer, MaxPool2x2, ReLU
from dlsvm.model import Network
from dlsvm.optim import Schedule, SgdState, sgd_momentum_step
from dlsvm.preprocess import Pipeline, augment

logger = logging.getLogger(__name__)

GRADCHECK_INIT_STD = 0.5
GRADCHECK_INPUT_DIM = 6


@dataclass
class MetricsRecord:
    epoch: int
    updates: int
    lr: float
    noise_std: float
    train_loss: float
    test_error_pct: float
    avg_xent: float
    hinge_sq_sum: float
    hinge_sq_mean: float

    def row(self) -> dict:
        return asdict(self)


@dataclass
class CrossObjectiveReport:
    """
    One model scored under every objective, each including its weight cost.

    avg_xent uses weight_decay, the hinge figures use C; softmax
    probabilities come from the scores whatever head trained the model.
    """

    error_pct: float
    avg_xent: float
    hinge_sum: float
    hinge_sq_sum: float
    hinge_sq_mean: float
    num_examples: int

    def own_loss(self, kind: HeadKind | str) -> float:
        return {
            HeadKind.SOFTMAX: self.avg_xent,
            HeadKind.L1SVM: self.hinge_sum,
            HeadKind.L2SVM: self.hinge_sq_sum,
        }[HeadKind(kind)]


def error_pct(predicted: np.ndarray, labels: np.ndarray) -> float:
    return 100.0 * float(np.mean(predicted != labels)) if labels.size else 0.0


def cross_objective_eval(
    network: Network, dataset: Dataset, C: float | None = None, weight_decay: float | None = None
) -> CrossObjectiveReport:
    """
    Score a trained network on a (preprocessed) dataset under all objectives.

    Args:
        network (Network): The model, whichever head trained it.
        dataset (Dataset): Inputs already passed through the run's pipeline.
        C (float | None): Hinge weight; taken from the network's HeadSpec when None.
        weight_decay (float | None): Softmax weight cost; from the HeadSpec when None.

    Returns:
        CrossObjectiveReport: Error % and the three losses.
    """
    C = network.head_spec.C if C is None else C
    weight_decay = network.head_spec.weight_decay if weight_decay is None else weight_decay
    labels = dataset.labels
    n = len(dataset)
    scores = network.scores(dataset.inputs)
    half_norm = 0.5 * network.head_weights.norm_sq()

    xent = -float(np.sum(heads.log_softmax(scores)[np.arange(n), labels])) / max(n, 1)
    margins = scores * heads.encode_targets(labels, scores.shape[1], "sign", dtype=scores.dtype)
    violations = np.maximum(1 - margins, 0)
    squared = float(np.sum(violations * violations))
    return CrossObjectiveReport(
        error_pct=error_pct(heads.predict(scores), labels),
        avg_xent=xent + weight_decay * half_norm,
        hinge_sum=half_norm + C * float(np.sum(violations)),
        hinge_sq_sum=half_norm + C * squared,
        hinge_sq_mean=half_norm + C * squared / max(n, 1),
        num_examples=n,
    )


def load_datasets(config: utils.RunConfig) -> tuple[Dataset, Dataset]:
    """Raw train and test splits named by the config (subset applied to train)."""
    if config.dataset == "blobs":
        rng = np.random.default_rng(config.data_seed)
        full = make_blobs(
            config.blobs_n + config.blobs_test_n, config.blobs_k, config.blobs_d, config.blobs_separation, rng
        )
        train_set = full.subset(np.arange(config.blobs_n), "train")
        if config.blobs_test_n:
            test_set = full.subset(np.arange(config.blobs_n, len(full)), "test")
        else:
            logger.warning("blobs_test_n is 0; reporting test error on the training split")
            test_set = Dataset(train_set.inputs, train_set.labels, "test", train_set.num_classes)
    elif config.dataset == "idx":
        check_paths(config.train_images, config.train_labels, config.test_images, config.test_labels)
        train_set = load_idx(config.train_images, config.train_labels, "train")
        test_set = load_idx(config.test_images, config.test_labels, "test")
    else:
        check_paths(*config.cifar_train, *config.cifar_test)
        train_set = load_cifar(config.cifar_train, "train")
        test_set = load_cifar(config.cifar_test, "test")

    num_classes = max(train_set.num_classes, test_set.num_classes)
    train_set.num_classes = test_set.num_classes = num_classes
    if config.train_subset and config.train_subset < len(train_set):
        rng = np.random.default_rng(config.data_seed)
        keep = np.sort(rng.permutation(len(train_set))[: config.train_subset])
        train_set = train_set.subset(keep)
        logger.info("using a %d-example training subset", len(train_set))
    return train_set, test_set


@dataclass
class TrainResult:
    network: Network
    pipeline: Pipeline
    records: list[MetricsRecord] = field(default_factory=list)
    train_report: CrossObjectiveReport | None = None
    test_report: CrossObjectiveReport | None = None
    out_dir: str = ""


def _prepared(pipeline: Pipeline, dataset: Dataset, dtype) -> Dataset:
    return Dataset(pipeline.apply(dataset.inputs).astype(dtype), dataset.labels, dataset.split, dataset.num_classes)


def _decayed(network: Network, grads: list[np.ndarray], lower_weight_decay: float) -> list[np.ndarray]:
    if not lower_weight_decay:
        return grads
    out = []
    for (name, value), grad in zip(network.parameters(), grads):
        if name.endswith((".weights", ".filters")):
            grad = grad + lower_weight_decay * value
        out.append(grad)
    return out


def train(
    config: utils.RunConfig,
    datasets: tuple[Dataset, Dataset] | None = None,
    network: Network | None = None,
    pipeline: Pipeline | None = None,
    warm_started: bool = False,
) -> TrainResult:
    """
    Train one network and stream metrics to <out_dir>/metrics.csv.

    Args:
        config (RunConfig): Validated run config.
        datasets (tuple | None): Raw (train, test) splits; loaded from the config when None.
        network (Network | None): Start from this network instead of a fresh one.
        pipeline (Pipeline | None): Already fitted preprocessing; fit on train when None.
        warm_started (bool): Tag outputs as a warm-started continuation.

    Returns:
        TrainResult: The trained network, its pipeline, every metrics row and final reports.
    """
    train_set, test_set = datasets or load_datasets(config)
    if pipeline is None:
        pipeline = utils.build_pipeline(config).fit(train_set.inputs)
    dtype = config.np_dtype
    train_set = _prepared(pipeline, train_set, dtype)
    test_set = _prepared(pipeline, test_set, dtype)
    input_dim = train_set.inputs.shape[1]

    init_rng, rng = utils.run_seeds(config.seed)
    if network is None:
        network = utils.build_network(config, input_dim, train_set.num_classes, init_rng)
    logger.info("training %s on %s", network, train_set)

    n = len(train_set)
    batches_per_epoch = -(-n // config.batch_size)
    total_steps = max(config.epochs * batches_per_epoch, 1)
    lr_schedule = Schedule(config.lr_start, config.lr_end, total_steps)
    noise_schedule = Schedule(config.noise_start, config.noise_end, total_steps)
    params = [value for _, value in network.parameters()]
    state = SgdState.zeros_like(params, config.momentum)
    image_shape = tuple(config.image_shape)

    os.makedirs(config.out_dir, exist_ok=True)
    suffix = ".warmstart" if warm_started else ""
    writer = metrics.MetricsWriter(os.path.join(config.out_dir, f"metrics{suffix}.csv"))
    update_writer = (
        metrics.MetricsWriter(os.path.join(config.out_dir, f"updates{suffix}.csv"), metrics.UPDATES_COLUMNS)
        if config.log_every_update
        else None
    )
    records = []

    def evaluate(epoch: int) -> None:
        step = state.step
        own = cross_objective_eval(network, train_set)
        record = MetricsRecord(
            epoch=epoch,
            updates=step,
            lr=lr_schedule(step),
            noise_std=noise_schedule(step),
            train_loss=own.own_loss(network.kind),
            test_error_pct=error_pct(network.predict(test_set.inputs), test_set.labels),
            avg_xent=own.avg_xent,
            hinge_sq_sum=own.hinge_sq_sum,
            hinge_sq_mean=own.hinge_sq_mean,
        )
        records.append(record)
        writer.append(record.row())
        logger.info(
            "epoch %d: loss %.6g, test error %.2f%%, lr %.4g, noise %.4g",
            epoch, record.train_loss, record.test_error_pct, record.lr, record.noise_std,
        )

    try:
        evaluate(0)
        for epoch in range(1, config.epochs + 1):
            for batch, indices in enumerate(minibatches(n, config.batch_size, rng)):
                x = train_set.inputs[indices]
                if config.augment:
                    x = augment(x.reshape((-1,) + image_shape), rng, config.max_jitter).reshape(len(indices), -1)
                lr = lr_schedule(state.step)
                noise = noise_schedule(state.step)
                out = network.loss(x, train_set.labels[indices], train=True, rng=rng, noise_std=noise)
                if not np.isfinite(out.loss):
                    message = f"non-finite loss at epoch {epoch}, minibatch {batch}, update {state.step + 1}"
                    logger.error(message)
                    raise DivergenceError(message)
                network.backward(out)
                grads = _decayed(network, network.gradients(), config.lower_weight_decay)
                sgd_momentum_step(params, grads, state, lr)
                if update_writer:
                    update_writer.append(
                        {"epoch": epoch, "updates": state.step, "lr": lr, "noise_std": noise, "batch_loss": out.loss}
                    )
            evaluate(epoch)
    finally:
        writer.close()
        if update_writer:
            update_writer.close()

    result = TrainResult(
        network=network,
        pipeline=pipeline,
        records=records,
        train_report=cross_objective_eval(network, train_set),
        test_report=cross_objective_eval(network, test_set),
        out_dir=config.out_dir,
    )
    artifact.write(os.path.join(config.out_dir, "model"), network, pipeline, config, input_dim, warm_started)
    write_outputs(result, config, warm_started)
    return result


def write_outputs(result: TrainResult, config: utils.RunConfig, warm_started: bool = False) -> None:
    suffix = ".warmstart" if warm_started else ""
    reports = {"train": asdict(result.train_report), "test": asdict(result.test_report)}
    rows = [{"split": split, **values} for split, values in reports.items()]
    metrics.write(
        os.path.join(config.out_dir, f"cross_objective{suffix}.csv"),
        rows,
        ("split", "num_examples", "error_pct", "avg_xent", "hinge_sum", "hinge_sq_sum", "hinge_sq_mean"),
    )
    title = f"{result.network.kind.value} run, seed {config.seed}" + (" (warm start)" if warm_started else "")
    report.write(
        os.path.join(config.out_dir, f"report{suffix}.html"),
        title,
        config.echo(),
        [r.row() for r in result.records],
        reports,
    )


def evaluate_model(model_dir: str, config: utils.RunConfig) -> dict[str, CrossObjectiveReport]:
    """Cross-objective figures of a saved model on the config's train and test splits."""
    network, pipeline, _ = artifact.read(model_dir)
    train_set, test_set = load_datasets(config)
    dtype = network.head_weights.W.dtype
    return {
        split.split: cross_objective_eval(network, _prepared(pipeline, split, dtype), config.C, config.weight_decay)
        for split in (train_set, test_set)
    }


def warm_start(source_dir: str, new_kind: HeadKind | str, config: utils.RunConfig) -> TrainResult:
    """
    Continue training a saved model under another head.

    All weights are copied, only the objective changes. The layer stack the
    config describes must match the saved one.
    """
    network, pipeline, manifest = artifact.read(source_dir)
    described = utils.build_network(
        config, manifest["input_dim"], manifest["num_classes"], np.random.default_rng(0)
    )
    if described.architecture() != network.architecture():
        raise ConfigError(
            f"cannot warm start: saved layers {network.architecture()} differ from config {described.architecture()}"
        )
    kind = HeadKind(new_kind)
    network = network.with_head(utils.head_spec(config, network.head_weights.dim, manifest["num_classes"], kind))
    logger.info("warm starting %s head from %s (%s)", kind.value, source_dir, manifest["head"])
    return train(config.override(head=kind.value), network=network, pipeline=pipeline, warm_started=True)


@dataclass
class Ensemble:
    """
    Trained networks voting by averaged scores.

    Softmax members average probabilities, SVM members raw scores.
    """

    members: list[Network]
    pipelines: list[Pipeline] | None = None

    def __post_init__(self) -> None:
        if not self.members:
            raise DomainError("an ensemble needs at least one model")
        kinds = {m.kind for m in self.members}
        if len(kinds) > 1:
            raise DomainError(f"ensemble members mix head kinds {sorted(k.value for k in kinds)}")
        if len({m.head_spec.num_classes for m in self.members}) > 1:
            raise DomainError("ensemble members disagree on the number of classes")
        if self.pipelines is not None and len(self.pipelines) != len(self.members):
            raise DomainError("one pipeline per ensemble member required")

    @property
    def averaging(self) -> str:
        return "probability" if self.members[0].kind is HeadKind.SOFTMAX else "score"


def ensemble_predict(ensemble: Ensemble, inputs: np.ndarray) -> np.ndarray:
    total = None
    for i, member in enumerate(ensemble.members):
        x = ensemble.pipelines[i].apply(inputs) if ensemble.pipelines else inputs
        scores = member.scores(x.astype(member.head_weights.W.dtype))
        if ensemble.averaging == "probability":
            scores = heads.softmax_probs(scores)
        total = scores if total is None else total + scores
    return heads.predict(total / len(ensemble.members))


def load_ensemble(model_dirs: list[str]) -> Ensemble:
    loaded = [artifact.read(d) for d in model_dirs]
    return Ensemble([network for network, _, _ in loaded], [pipeline for _, pipeline, _ in loaded])


def gradcheck(config: utils.RunConfig) -> checks.GradcheckReport:
    """
    Finite-difference suite for every layer kind in the configured network,
    all three heads, and the network end to end. Layer sizes must be tiny.
    """
    utils.check_tiny(config)
    rng = np.random.default_rng(config.seed)
    eps, tol = config.gradcheck_eps, config.gradcheck_tol
    tiny_config = config.override(init_std=GRADCHECK_INIT_STD, dtype="float64")
    input_dim = int(np.prod(config.image_shape)) if config.architecture == "convnet" else GRADCHECK_INPUT_DIM
    network = utils.build_network(tiny_config, input_dim, config.blobs_k, rng)

    by_kind = {
        DenseLayer: checks.check_dense,
        ReLU: checks.check_relu,
        ConvLayer: checks.check_conv,
        MaxPool2x2: checks.check_maxpool,
    }
    report = checks.GradcheckReport()
    for kind, check in by_kind.items():
        if kind in checks.layer_kinds(network):
            report.results += check(rng, eps, tol)
    for kind in HeadKind:
        report.results += checks.check_head(kind, rng, eps, tol)
    report.results += checks.check_network(network, input_dim, rng, eps, tol)
    logger.info("gradcheck: %d tensors, max error %.3g", len(report.results), report.max_error)
    return report


def cross_validate(config: utils.RunConfig) -> list[float]:
    """Train one model per fold of the training split; returns validation error % per fold."""
    train_set, _ = load_datasets(config)
    folds = kfold(len(train_set), config.folds, np.random.default_rng(config.data_seed))
    errors = []
    for i, (train_idx, val_idx) in enumerate(folds):
        fold_config = config.override(out_dir=os.path.join(config.out_dir, f"fold-{i}"))
        result = train(fold_config, datasets=(train_set.subset(train_idx), train_set.subset(val_idx, "val")))
        errors.append(result.test_report.error_pct)
        logger.info("fold %d/%d: validation error %.2f%%", i + 1, len(folds), errors[-1])
    metrics.write(
        os.path.join(config.out_dir, "cv.csv"),
        [{"fold": i, "val_error_pct": e} for i, e in enumerate(errors)],
        ("fold", "val_error_pct"),
    )
    logger.info("cross validation: mean error %.2f%% over %d folds", float(np.mean(errors)), len(errors))
    return errors
