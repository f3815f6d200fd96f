from dlsvm import harness, utils
from dlsvm.errors import DlsvmError
from dlsvm.generator import metrics
import argparse
import logging
import os
import sys

logger = logging.getLogger("dlsvm")

DEFAULT_CONFIG = os.path.join(os.getcwd(), "config", "blobs.yaml")


def parse_args(argv=None) -> argparse.Namespace:
    parser = argparse.ArgumentParser(
        prog="dlsvm", description="Deep networks with softmax, L1-SVM or L2-SVM output objectives."
    )
    commands = parser.add_subparsers(dest="command", required=True)

    def command(name: str, help: str) -> argparse.ArgumentParser:
        sub = commands.add_parser(name, help=help)
        sub.add_argument("--config", default=DEFAULT_CONFIG, help="run config (yaml)")
        sub.add_argument("--seed", type=int, help="override the config seed")
        sub.add_argument("--out-dir", help="override the config out_dir")
        sub.add_argument("-v", "--verbose", action="store_true", help="debug logging")
        return sub

    command("train", "train one model").add_argument("--head", help="override the config head")
    command("eval", "cross-objective evaluation of a saved model").add_argument(
        "--model", required=True, help="model directory"
    )
    command("gradcheck", "finite-difference gradient checks on a tiny network")
    warm = command("warmstart", "continue a saved model under another head")
    warm.add_argument("--model", required=True, help="source model directory")
    warm.add_argument("--head", required=True, help="new head kind")
    command("ensemble", "average saved models and report test error").add_argument(
        "--model", action="append", required=True, help="model directory (repeat)"
    )
    command("cv", "k-fold cross validation on the training split")
    return parser.parse_args(argv)


def run(args: argparse.Namespace) -> int:
    config = utils.load_config(args.config).override(seed=args.seed, out_dir=args.out_dir)
    logger.info("config: %s, seed %d, out dir %s", args.config, config.seed, config.out_dir)

    if args.command == "train":
        result = harness.train(config.override(head=args.head))
        logger.info("final test error: %.2f%%", result.test_report.error_pct)
    elif args.command == "eval":
        reports = harness.evaluate_model(args.model, config)
        os.makedirs(config.out_dir, exist_ok=True)
        rows = [{"split": split, **vars(r)} for split, r in reports.items()]
        metrics.write(
            os.path.join(config.out_dir, "eval.csv"),
            rows,
            ("split", "num_examples", "error_pct", "avg_xent", "hinge_sum", "hinge_sq_sum", "hinge_sq_mean"),
        )
        for row in rows:
            logger.info("%s", ", ".join(f"{k}={metrics.format_value(v)}" for k, v in row.items()))
    elif args.command == "gradcheck":
        report = harness.gradcheck(config)
        for failure in report.failures():
            logger.error("%s", failure.error())
        if not report.ok:
            return 1
        logger.info("all %d gradient checks passed", len(report.results))
    elif args.command == "warmstart":
        result = harness.warm_start(args.model, args.head, config)
        logger.info("final test error after warm start: %.2f%%", result.test_report.error_pct)
    elif args.command == "ensemble":
        ensemble = harness.load_ensemble(args.model)
        _, test_set = harness.load_datasets(config)
        error = harness.error_pct(harness.ensemble_predict(ensemble, test_set.inputs), test_set.labels)
        os.makedirs(config.out_dir, exist_ok=True)
        metrics.write(
            os.path.join(config.out_dir, "ensemble.csv"),
            [{"members": len(args.model), "averaging": ensemble.averaging, "test_error_pct": error}],
            ("members", "averaging", "test_error_pct"),
        )
        logger.info("ensemble of %d (%s averaging): test error %.2f%%", len(args.model), ensemble.averaging, error)
    elif args.command == "cv":
        if not config.folds:
            config = config.override(folds=8)
        harness.cross_validate(config)
    return 0


def main(argv=None) -> int:
    args = parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        return run(args)
    except (DlsvmError, FileNotFoundError) as e:
        logger.error("%s: %s", type(e).__name__, e)
        return 1


if __name__ == "__main__":
    sys.exit(main())
