from dlsvm.generator import metrics
import logging
import os
import subprocess
import sys

import numpy as np

CONFIG = os.getenv("CONFIG", os.path.join("config", "mnist_desk.yaml"))
SEEDS = [int(s) for s in os.getenv("SEEDS", "0,1,2,3,4").split(",")]
HEADS = os.getenv("HEADS", "softmax,l2svm").split(",")
OUT_DIR = os.getenv("OUT_DIR", os.path.join("runs", "sweep"))

logger = logging.getLogger("sweep")


def run_dir(head: str, seed: int) -> str:
    return os.path.join(OUT_DIR, f"{head}-seed{seed}")


def build_commands() -> list[list[str]]:
    """One independent training process per (head, seed)."""
    return [
        [sys.executable, "main.py", "train", "--config", CONFIG, "--head", head,
         "--seed", str(seed), "--out-dir", run_dir(head, seed)]
        for head in HEADS
        for seed in SEEDS
    ]


def summarize() -> dict[str, list[float]]:
    """Final test error per head, one entry per finished seed."""
    summary = {}
    for head in HEADS:
        errors = []
        for seed in SEEDS:
            path = os.path.join(run_dir(head, seed), "metrics.csv")
            if os.path.exists(path):
                errors.append(float(metrics.read(path)[-1]["test_error_pct"]))
        summary[head] = errors
    return summary


def main() -> int:
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    failed = 0
    for command in build_commands():
        logger.info("run: %s", " ".join(command))
        if subprocess.run(command).returncode != 0:
            failed += 1
            logger.error("failed: %s", " ".join(command))
    rows = []
    for head, errors in summarize().items():
        if errors:
            logger.info("%s: mean test error %.3f%% over %d seeds", head, np.mean(errors), len(errors))
            rows.append({"head": head, "seeds": len(errors), "mean_test_error_pct": float(np.mean(errors)),
                         "min_test_error_pct": min(errors), "max_test_error_pct": max(errors)})
    metrics.write(
        os.path.join(OUT_DIR, "summary.csv"),
        rows,
        ("head", "seeds", "mean_test_error_pct", "min_test_error_pct", "max_test_error_pct"),
    )
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
