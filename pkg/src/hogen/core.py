"""Shared data model and geometric primitives.

Everything downstream (detectors, ensembles, generators) works on the
immutable types defined here: a dense real-valued dataset, an axis-aligned
subspace, and the tri-state verdict used to mark agreement or disagreement
between two fitted detectors.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np


class TriState(enum.IntEnum):
    """Joint verdict of a full-space detector and a subspace ensemble."""

    BOTH_OUTLIER = 1
    DISAGREE = 0
    BOTH_INLIER = -1


class Side(str, enum.Enum):
    """Which way the two detectors disagree on a point.

    H1: inlier to the full-space detector but outlier to the ensemble.
    H2: outlier to the full-space detector but inlier to the ensemble.
    """

    H1 = "H1"
    H2 = "H2"


class CsvParseError(ValueError):
    """A cell in an input CSV could not be parsed as finite numeric data."""


class ConfigError(ValueError):
    """A configuration value or combination is invalid."""


class GenerationError(RuntimeError):
    """A generator exhausted its restart budget without emitting a point."""

    def __init__(self, message: str, restarts: int = 0, diagnostics: dict | None = None):
        super().__init__(message)
        self.restarts = restarts
        self.diagnostics = diagnostics or {}


def _readonly(arr: np.ndarray) -> np.ndarray:
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class Dataset:
    """A dense n x d matrix of finite reals with optional binary outlier labels."""

    points: np.ndarray
    labels: np.ndarray | None = None
    feature_names: list[str] | None = None

    def __post_init__(self):
        pts = np.ascontiguousarray(self.points, dtype=np.float64)
        if pts.ndim != 2:
            raise ValueError(f"points must be 2-D, got shape {pts.shape}")
        if pts.shape[0] < 1 or pts.shape[1] < 1:
            raise ValueError(f"need at least one row and one column, got shape {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise ValueError("points contain non-finite entries")
        object.__setattr__(self, "points", _readonly(pts))

        if self.labels is not None:
            lab = np.ascontiguousarray(self.labels, dtype=np.int64)
            if lab.shape != (pts.shape[0],):
                raise ValueError(
                    f"labels must have length {pts.shape[0]}, got shape {lab.shape}"
                )
            if not np.all((lab == 0) | (lab == 1)):
                raise ValueError("labels must be 0 or 1")
            object.__setattr__(self, "labels", _readonly(lab))

        if self.feature_names is not None:
            names = list(self.feature_names)
            if len(names) != pts.shape[1]:
                raise ValueError(
                    f"feature_names must have length {pts.shape[1]}, got {len(names)}"
                )
            object.__setattr__(self, "feature_names", names)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]


@dataclass(frozen=True)
class Subspace:
    """A strictly increasing tuple of feature indices."""

    dims: tuple[int, ...]

    def __post_init__(self):
        dims = tuple(int(i) for i in self.dims)
        if len(dims) == 0:
            raise ValueError("subspace must contain at least one dimension")
        if any(i < 0 for i in dims):
            raise ValueError(f"negative dimension index in {dims}")
        if any(b <= a for a, b in zip(dims, dims[1:])):
            raise ValueError(f"dimension indices must be strictly increasing, got {dims}")
        object.__setattr__(self, "dims", dims)

    def __len__(self) -> int:
        return len(self.dims)


def project(data: Dataset, s: Subspace) -> Dataset:
    """Select the subspace's columns from a dataset, carrying labels over."""
    if s.dims[-1] >= data.d:
        raise ValueError(
            f"invalid subspace: index {s.dims[-1]} out of range for d={data.d}"
        )
    names = None
    if data.feature_names is not None:
        names = [data.feature_names[i] for i in s.dims]
    return Dataset(data.points[:, list(s.dims)], labels=data.labels, feature_names=names)


def max_norm(data: Dataset) -> float:
    """Largest Euclidean row norm in the dataset."""
    if data.n == 0:
        raise ValueError("empty dataset")
    return float(np.linalg.norm(data.points, axis=1).max())


def convex_point(x: np.ndarray, y: np.ndarray, t: float) -> np.ndarray:
    """Point t*y + (1-t)*x on the segment from x to y, t in [0, 1]."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError(f"shape mismatch: {x.shape} vs {y.shape}")
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"t must be in [0, 1], got {t}")
    return t * y + (1.0 - t) * x
