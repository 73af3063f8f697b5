"""Accuracy metrics, deterministic splits and multi-seed aggregation."""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .data import PLLDataset
from .errors import DataInvariantError
from .network import DenseNet, TransformConfig
from .rng import substream
from .trainer import TrainConfig, fit, predict_batch

CSV_COLUMNS = ("method", "dataset", "seed_count", "mean_acc", "std_acc")


@dataclass(frozen=True)
class SplitSpec:
    """Train/val/test fractions (must sum to 1) plus the shuffle seed."""

    train: float = 0.8
    val: float = 0.1
    test: float = 0.1
    seed: int = 0

    def __post_init__(self):
        fracs = (self.train, self.val, self.test)
        if any(f < 0.0 for f in fracs):
            raise ValueError("split fractions must be nonnegative")
        if abs(sum(fracs) - 1.0) > 1e-12:
            raise ValueError(f"split fractions sum to {sum(fracs)!r}, not 1")


def split(dataset: PLLDataset, spec: SplitSpec):
    """Disjoint, exhaustive, seed-deterministic (train, val, test) partition."""
    perm = substream(spec.seed, "split").permutation(dataset.n)
    bounds = [int(round(dataset.n * f)) for f in
              np.cumsum([spec.train, spec.val, spec.test])]
    parts = (perm[:bounds[0]], perm[bounds[0]:bounds[1]], perm[bounds[1]:bounds[2]])
    for frac, part, name in zip((spec.train, spec.val, spec.test), parts,
                                ("train", "val", "test")):
        if frac > 0.0 and part.size == 0:
            raise DataInvariantError(
                f"{name} split is empty for n={dataset.n}, fraction={frac}"
            )
    return tuple(dataset.subset(part) if part.size else None for part in parts)


def accuracy(net_f: DenseNet, dataset: PLLDataset, tc: TransformConfig) -> float:
    """Fraction of instances whose predicted label matches the true one."""
    if dataset.true_labels is None:
        raise DataInvariantError("accuracy needs a dataset with true labels")
    if net_f.in_dim != dataset.q:
        raise DataInvariantError(
            f"model expects {net_f.in_dim} features, dataset has {dataset.q}"
        )
    labels, _ = predict_batch(net_f, dataset.features, tc)
    return float(np.mean(labels == dataset.true_labels))


def aggregate(values: Sequence[float]):
    """Sample mean and (n-1)-denominator standard deviation."""
    values = np.asarray(list(values), dtype=np.float64)
    if values.size < 2:
        raise ValueError("need at least 2 values to aggregate")
    return float(values.mean()), float(values.std(ddof=1))


def multi_seed_report(config: TrainConfig, dataset: PLLDataset,
                      seeds: Sequence[int], method: str = "idgp",
                      dataset_name: str = "dataset"):
    """Train/evaluate once per seed on fresh 80/10/10 splits.

    Returns ``(row, per_seed_acc)`` where ``row`` follows the CSV contract
    (method, dataset, seed_count, mean_acc, std_acc).
    """
    seeds = [int(s) for s in seeds]
    if len(seeds) < 2:
        raise ValueError("need at least 2 seeds for a mean/std report")
    accs = []
    for seed in seeds:
        train_ds, val_ds, test_ds = split(dataset, SplitSpec(seed=seed))
        cfg = replace(config, seed=seed)
        net_f, _, _ = fit(cfg, train_ds, val_dataset=val_ds)
        accs.append(accuracy(net_f, test_ds, cfg.transform_config))
    mean, std = aggregate(accs)
    row = {
        "method": method,
        "dataset": dataset_name,
        "seed_count": len(seeds),
        "mean_acc": mean,
        "std_acc": std,
    }
    return row, accs


def write_report_csv(path, rows) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: row[k] for k in CSV_COLUMNS})


def read_report_csv(path):
    with Path(path).open(newline="") as fh:
        return [dict(row) for row in csv.DictReader(fh)]
