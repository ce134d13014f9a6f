"""SMOTE minority oversampling with brute-force k-nearest neighbours."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .errors import DimensionMismatch, SingleClass, TooFewMinority
from .rng import derive_stream


@dataclass(frozen=True)
class SmoteConfig:
    k_neighbors: int = 5
    target_ratio: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.k_neighbors < 1:
            raise ValueError("k_neighbors must be >= 1")
        if not 0.0 < self.target_ratio <= 1.0:
            raise ValueError("target_ratio must lie in (0, 1]")


def synth_point(x, neighbor, u: float) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    neighbor = np.asarray(neighbor, dtype=np.float64)
    if x.shape != neighbor.shape:
        raise DimensionMismatch(f"{x.shape} vs {neighbor.shape}")
    return x + u * (neighbor - x)


def nearest_neighbors(points: np.ndarray, k: int) -> np.ndarray:
    """Indices of the ``k`` nearest other points for each row.

    Euclidean distance; equal distances resolve to the lower row index.
    """
    diff = points[:, None, :] - points[None, :, :]
    dist = np.sqrt((diff * diff).sum(axis=-1))
    np.fill_diagonal(dist, np.inf)
    order = np.argsort(dist, axis=1, kind="stable")
    return order[:, :k]


def target_minority_count(majority: int, target_ratio: float) -> int:
    # half-up rounding
    return math.floor(target_ratio * majority + 0.5)


def oversample(ds: Dataset, cfg: SmoteConfig, rng: np.random.Generator | None = None) -> Dataset:
    """Append synthetic minority rows until minority = round(ratio * majority).

    Original rows come first and are untouched; synthetic rows follow with
    fresh row ids starting above the current maximum.
    """
    counts = ds.class_counts()
    if counts[0] == 0 or counts[1] == 0:
        raise SingleClass(f"need both classes, got counts {counts}")
    minority = 1 if counts[1] < counts[0] else 0
    if counts[0] == counts[1]:
        minority = 1
    n_min, n_maj = counts[minority], counts[1 - minority]
    n_synth = target_minority_count(n_maj, cfg.target_ratio) - n_min
    if n_synth <= 0:
        return ds
    if n_min < cfg.k_neighbors + 1:
        raise TooFewMinority(f"{n_min} minority rows, need at least k_neighbors + 1 = {cfg.k_neighbors + 1}")
    if rng is None:
        rng = derive_stream(cfg.seed, "smote", 0)

    min_idx = np.flatnonzero(ds.labels == minority)
    pts = ds.features[min_idx]
    nn = nearest_neighbors(pts, cfg.k_neighbors)

    base = rng.integers(0, n_min, size=n_synth)
    pick = rng.integers(0, cfg.k_neighbors, size=n_synth)
    u = rng.random(size=n_synth)
    parents = pts[base]
    partners = pts[nn[base, pick]]
    synth = parents + u[:, None] * (partners - parents)

    start = int(ds.row_ids.max()) + 1 if ds.n else 0
    return Dataset(
        features=np.vstack([ds.features, synth]),
        labels=np.concatenate([ds.labels, np.full(n_synth, minority, dtype=np.int64)]),
        feature_names=ds.feature_names,
        row_ids=np.concatenate([ds.row_ids, np.arange(start, start + n_synth)]),
    )
