# Example (metrics.csv):
# epoch,updates,lr,noise_std,train_loss,test_error_pct,avg_xent,hinge_sq_sum,hinge_sq_mean
# 0,0,0.1,0.3,50.0100007,90.2,2.30258509,100.000124,1.00010012
# 1,50,0.0983333333,0.295,12.2711634,6.1,0.402177349,12.2711634,0.0648107219

import csv
import os

METRICS_COLUMNS = (
    "epoch",
    "updates",
    "lr",
    "noise_std",
    "train_loss",
    "test_error_pct",
    "avg_xent",
    "hinge_sq_sum",
    "hinge_sq_mean",
)
UPDATES_COLUMNS = ("epoch", "updates", "lr", "noise_std", "batch_loss")


def format_value(value) -> str:
    if isinstance(value, float):
        return f"{value:.9g}"
    return str(value)


class MetricsWriter:
    """Appends rows as they are produced, flushing each one."""

    def __init__(self, filepath: str, columns: tuple = METRICS_COLUMNS) -> None:
        os.makedirs(os.path.dirname(filepath) or ".", exist_ok=True)
        self.columns = columns
        self.file = open(filepath, "w", newline="", encoding="utf-8")
        self.writer = csv.writer(self.file, lineterminator="\n")
        self.writer.writerow(columns)

    def append(self, row: dict) -> None:
        self.writer.writerow([format_value(row[c]) for c in self.columns])
        self.file.flush()

    def close(self) -> None:
        self.file.close()

    def __enter__(self) -> "MetricsWriter":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def write(filepath: str, rows: list[dict], columns: tuple) -> bool:
    with MetricsWriter(filepath, columns) as writer:
        for row in rows:
            writer.append(row)
    return True


def read(filepath: str) -> list[dict]:
    with open(filepath, newline="", encoding="utf-8") as f:
        return list(csv.DictReader(f))
