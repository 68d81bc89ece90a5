"""Synthetic data generation, CSV I/O, downsampling, and experiment splits."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .core import ConfigError, CsvParseError, Dataset


@dataclass(frozen=True)
class GaussianSpec:
    """Shape of a clustered-Gaussian synthetic dataset."""

    clusters: int
    d: int
    n: int
    seed: int | None = None

    def __post_init__(self):
        if self.clusters < 1:
            raise ValueError(f"clusters must be >= 1, got {self.clusters}")
        if self.d < 1:
            raise ValueError(f"d must be >= 1, got {self.d}")
        if self.n < self.clusters:
            raise ValueError(f"need n >= clusters, got n={self.n}, clusters={self.clusters}")


def gen_gaussian_clusters(spec: GaussianSpec) -> Dataset:
    """Clustered standard Gaussians with means uniform in [-10, 10]^d.

    Cluster means are drawn first, then rows cluster by cluster, so the
    whole dataset is a pure function of the seed. Rows are spread across
    clusters as evenly as possible. No labels are attached.
    """
    rng = np.random.default_rng(spec.seed)
    means = rng.uniform(-10.0, 10.0, size=(spec.clusters, spec.d))
    base, extra = divmod(spec.n, spec.clusters)
    blocks = []
    for i in range(spec.clusters):
        count = base + (1 if i < extra else 0)
        blocks.append(means[i] + rng.standard_normal((count, spec.d)))
    return Dataset(np.vstack(blocks))


def load_csv(path, label_column: str | None = None) -> Dataset:
    """Read a headered CSV of finite numeric features, optionally splitting
    off a binary label column.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise CsvParseError(f"{path}: empty file, expected a header row")
        label_idx = None
        if label_column is not None:
            if label_column not in header:
                raise ConfigError(
                    f"{path}: label column {label_column!r} not in header {header}"
                )
            label_idx = header.index(label_column)

        points, labels = [], []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise CsvParseError(
                    f"{path}, line {lineno}: expected {len(header)} fields, got {len(row)}"
                )
            values = []
            for j, cell in enumerate(row):
                try:
                    v = float(cell)
                except ValueError:
                    raise CsvParseError(
                        f"{path}, line {lineno}, column {header[j]!r}: "
                        f"not numeric: {cell!r}"
                    ) from None
                if not math.isfinite(v):
                    raise CsvParseError(
                        f"{path}, line {lineno}, column {header[j]!r}: "
                        f"non-finite value {cell!r}"
                    )
                if j == label_idx:
                    if v not in (0.0, 1.0):
                        raise CsvParseError(
                            f"{path}, line {lineno}, column {header[j]!r}: "
                            f"label must be 0 or 1, got {cell!r}"
                        )
                    labels.append(int(v))
                else:
                    values.append(v)
            points.append(values)

    feature_names = [h for j, h in enumerate(header) if j != label_idx]
    if not points:
        raise CsvParseError(f"{path}: no data rows")
    return Dataset(
        np.array(points, dtype=np.float64),
        labels=np.array(labels, dtype=np.int64) if label_idx is not None else None,
        feature_names=feature_names,
    )


def save_csv(data: Dataset, path, label_column: str = "outlier") -> None:
    """Write a dataset as headered CSV; labels, when present, become a
    trailing binary column. Floats use repr for lossless round-trips.
    """
    names = data.feature_names or [f"x{j}" for j in range(data.d)]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        if data.labels is not None:
            writer.writerow([*names, label_column])
            for row, lab in zip(data.points, data.labels):
                writer.writerow([*(repr(float(v)) for v in row), int(lab)])
        else:
            writer.writerow(names)
            for row in data.points:
                writer.writerow([repr(float(v)) for v in row])


def downsample_outliers(data: Dataset, target_fraction: float, seed=None) -> Dataset:
    """Keep all inliers and a uniform subset of outliers so the outlier share
    lands on target_fraction (up to the ceiling granularity of the final size).
    """
    if data.labels is None:
        raise ConfigError("downsampling requires labels")
    out_idx = np.flatnonzero(data.labels == 1)
    in_idx = np.flatnonzero(data.labels == 0)
    current = out_idx.size / data.n
    if not 0.0 < target_fraction <= current:
        raise ConfigError(
            f"target_fraction must be in (0, {current:.6g}], got {target_fraction}"
        )
    keep_out = math.ceil(target_fraction * in_idx.size / (1.0 - target_fraction))
    keep_out = min(keep_out, out_idx.size)
    rng = np.random.default_rng(seed)
    chosen = rng.choice(out_idx, size=keep_out, replace=False)
    keep = np.sort(np.concatenate([in_idx, chosen]))
    return Dataset(data.points[keep], labels=data.labels[keep],
                   feature_names=data.feature_names)


def split_occ(data: Dataset, seed=None) -> tuple[Dataset, Dataset]:
    """One-class split: train gets a random 80% of the inliers and no
    outliers; test gets the remaining inliers plus every outlier.
    """
    if data.labels is None:
        raise ConfigError("one-class split requires labels")
    in_idx = np.flatnonzero(data.labels == 0)
    out_idx = np.flatnonzero(data.labels == 1)
    if in_idx.size == 0 or out_idx.size == 0:
        raise ConfigError("one-class split requires both classes")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(in_idx)
    n_train = int(0.8 * in_idx.size)
    train_idx = np.sort(perm[:n_train])
    test_idx = np.sort(np.concatenate([perm[n_train:], out_idx]))
    train = Dataset(data.points[train_idx], labels=np.zeros(n_train, dtype=np.int64),
                    feature_names=data.feature_names)
    test = Dataset(data.points[test_idx], labels=data.labels[test_idx],
                   feature_names=data.feature_names)
    return train, test


def _row_keys(points: np.ndarray) -> set[bytes]:
    return {row.tobytes() for row in np.ascontiguousarray(points)}


def split_sod(d_small: Dataset, d_full: Dataset, seed=None) -> tuple[Dataset, Dataset]:
    """Supervised split: stratified 20/80 of the downsampled set, then the
    test side additionally receives every full-set outlier that the
    downsampled set does not contain (matched by exact feature bytes).
    """
    if d_small.labels is None or d_full.labels is None:
        raise ConfigError("supervised split requires labels on both datasets")
    small_keys = _row_keys(d_small.points)
    full_keys = _row_keys(d_full.points)
    if not small_keys <= full_keys:
        raise ConfigError(
            "downsampled rows not identifiable in the full dataset "
            "(no exact feature match for some rows)"
        )

    in_idx = np.flatnonzero(d_small.labels == 0)
    out_idx = np.flatnonzero(d_small.labels == 1)
    rng = np.random.default_rng(seed)
    n_train = int(0.2 * d_small.n)
    n_out_train = min(math.ceil(0.2 * out_idx.size), out_idx.size, n_train)
    n_in_train = min(n_train - n_out_train, in_idx.size)
    in_perm = rng.permutation(in_idx)
    out_perm = rng.permutation(out_idx)
    train_idx = np.sort(np.concatenate([in_perm[:n_in_train], out_perm[:n_out_train]]))
    test_idx = np.sort(np.concatenate([in_perm[n_in_train:], out_perm[n_out_train:]]))

    extra_rows = [
        row for row, lab in zip(d_full.points, d_full.labels)
        if lab == 1 and row.tobytes() not in small_keys
    ]
    test_points = d_small.points[test_idx]
    test_labels = d_small.labels[test_idx]
    if extra_rows:
        test_points = np.vstack([test_points, np.array(extra_rows)])
        test_labels = np.concatenate(
            [test_labels, np.ones(len(extra_rows), dtype=np.int64)]
        )
    train = Dataset(d_small.points[train_idx], labels=d_small.labels[train_idx],
                    feature_names=d_small.feature_names)
    test = Dataset(test_points, labels=test_labels, feature_names=d_small.feature_names)
    return train, test
