"""CSV ingestion, stratified holdout and stratified client partitioning."""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateSplit,
    EmptyData,
    MissingFile,
    ParseError,
    SchemaMismatch,
    TooFewRows,
)
from .rng import derive_stream

PIMA_SCHEMA = (
    "Pregnancies",
    "Glucose",
    "BloodPressure",
    "SkinThickness",
    "Insulin",
    "BMI",
    "DiabetesPedigreeFunction",
    "Age",
    "Outcome",
)


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    feature_names: tuple[str, ...]
    row_ids: np.ndarray

    def __post_init__(self):
        features = np.asarray(self.features, dtype=np.float64)
        if features.ndim == 1:
            features = features.reshape(-1, len(self.feature_names))
        labels = np.asarray(self.labels, dtype=np.int64)
        row_ids = np.asarray(self.row_ids, dtype=np.int64)
        if features.shape[0] != labels.shape[0] or labels.shape[0] != row_ids.shape[0]:
            raise ValueError("features, labels and row_ids must have the same length")
        if features.shape[1] != len(self.feature_names):
            raise ValueError("feature count does not match feature_names")
        if not np.isin(labels, (0, 1)).all():
            raise ValueError("labels must be 0 or 1")
        if np.unique(row_ids).size != row_ids.size:
            raise ValueError("row_ids must be unique")
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "row_ids", row_ids)
        object.__setattr__(self, "feature_names", tuple(self.feature_names))

    @property
    def n(self) -> int:
        return int(self.labels.shape[0])

    @property
    def d(self) -> int:
        return int(self.features.shape[1])

    def class_counts(self) -> dict[int, int]:
        return {c: int((self.labels == c).sum()) for c in (0, 1)}

    def take(self, idx) -> "Dataset":
        idx = np.asarray(idx, dtype=np.int64)
        return Dataset(self.features[idx], self.labels[idx], self.feature_names, self.row_ids[idx])

    def select_rows(self, row_ids) -> "Dataset":
        """Subset by row id, keeping this dataset's row order."""
        mask = np.isin(self.row_ids, np.asarray(row_ids, dtype=np.int64))
        return self.take(np.flatnonzero(mask))


@dataclass(frozen=True)
class ClientPartition:
    client_id: int
    data: Dataset = field(repr=False)


def load_csv(path, schema=PIMA_SCHEMA) -> Dataset:
    """Read a headered CSV whose last column is the binary label.

    Row numbers in ``ParseError`` count data rows from 1 (the header is row 0);
    columns count from 1.
    """
    path = os.fspath(path)
    if not os.path.isfile(path):
        raise MissingFile(f"dataset not found: {path}")
    schema = tuple(schema)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyData(f"{path}: no header row") from None
        header = [h.strip() for h in header]
        if tuple(header) != schema:
            raise SchemaMismatch(f"expected columns {list(schema)}, got {header}")
        rows = []
        for r, cells in enumerate(reader, start=1):
            if not cells:
                continue
            if len(cells) != len(schema):
                raise SchemaMismatch(f"row {r} has {len(cells)} cells, expected {len(schema)}")
            values = []
            for c, cell in enumerate(cells, start=1):
                try:
                    v = float(cell)
                except ValueError:
                    raise ParseError(r, c, cell) from None
                if not math.isfinite(v):
                    raise ParseError(r, c, cell)
                values.append(v)
            if values[-1] not in (0.0, 1.0):
                raise ParseError(r, len(schema), cells[-1])
            rows.append(values)
    if not rows:
        raise EmptyData(f"{path}: header only, no data rows")
    arr = np.asarray(rows, dtype=np.float64)
    return Dataset(
        features=arr[:, :-1],
        labels=arr[:, -1].astype(np.int64),
        feature_names=schema[:-1],
        row_ids=np.arange(arr.shape[0]),
    )


def stratified_holdout(ds: Dataset, test_fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Per class, move floor(test_fraction * n_c) shuffled rows to the test split."""
    if not 0.0 <= test_fraction < 1.0:
        raise DegenerateSplit(f"test_fraction must lie in [0, 1), got {test_fraction}")
    rng = derive_stream(seed, "holdout", 0)
    test_idx = []
    for c in (0, 1):
        idx = np.flatnonzero(ds.labels == c)
        if idx.size == 0:
            raise DegenerateSplit(f"class {c} has no rows")
        n_test = math.floor(test_fraction * idx.size)
        if test_fraction > 0 and n_test == 0:
            raise DegenerateSplit(f"class {c} ({idx.size} rows) contributes no test rows")
        test_idx.append(rng.permutation(idx)[:n_test])
    test_mask = np.zeros(ds.n, dtype=bool)
    test_mask[np.concatenate(test_idx)] = True
    return ds.take(np.flatnonzero(~test_mask)), ds.take(np.flatnonzero(test_mask))


def partition_clients(train: Dataset, k: int, seed: int) -> list[ClientPartition]:
    """Deal each class's shuffled rows round-robin over ``k`` clients.

    The dealing cursor carries over from class 0 to class 1, so client sizes
    also differ by at most one.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    rng = derive_stream(seed, "partition", 0)
    buckets: list[list[int]] = [[] for _ in range(k)]
    cursor = 0
    for c in (0, 1):
        idx = np.flatnonzero(train.labels == c)
        if idx.size < k:
            raise TooFewRows(c, int(idx.size), k)
        for i in rng.permutation(idx):
            buckets[cursor].append(int(i))
            cursor = (cursor + 1) % k
    return [ClientPartition(cid, train.take(sorted(b))) for cid, b in enumerate(buckets)]
