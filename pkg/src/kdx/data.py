"""Labeled dataset container and CSV ingestion/export.

CSV schema: one header row, numeric feature columns, final column holding
the integer class label.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import IngestionError, InvalidInputError


@dataclass
class Dataset:
    """Feature matrix with integer class labels in {0..class_count-1}."""

    features: np.ndarray
    labels: np.ndarray
    class_count: int = field(default=0)

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.features.ndim != 2:
            raise InvalidInputError("features must be a 2-D array")
        n, d = self.features.shape
        if n < 1 or d < 1:
            raise InvalidInputError("dataset must contain at least one sample and one feature")
        if self.labels.shape != (n,):
            raise InvalidInputError("labels must be a vector of length n")
        if not np.isfinite(self.features).all():
            raise InvalidInputError("features contain non-finite values")
        if self.class_count == 0:
            self.class_count = int(self.labels.max()) + 1
        if self.labels.min() < 0 or self.labels.max() >= self.class_count:
            raise InvalidInputError("labels must lie in {0..class_count-1}")

    @property
    def sample_count(self) -> int:
        return self.features.shape[0]

    @property
    def feature_count(self) -> int:
        return self.features.shape[1]

    def subset(self, indices) -> "Dataset":
        indices = np.asarray(indices)
        return Dataset(self.features[indices], self.labels[indices], self.class_count)

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.class_count)

    def priors(self) -> np.ndarray:
        return self.class_counts() / self.sample_count


def load_csv(path: str | os.PathLike) -> Dataset:
    """Read a headered CSV with numeric features and a final integer label column."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise IngestionError("empty CSV file") from None
        rows = [row for row in reader if row]
    if len(header) < 2:
        raise IngestionError("CSV needs at least one feature column and a label column")
    if not rows:
        raise IngestionError("CSV contains a header but no data rows")

    columns = list(zip(*rows))
    bad = []
    parsed = []
    for name, col in zip(header[:-1], columns[:-1]):
        try:
            parsed.append([float(v) for v in col])
        except ValueError:
            bad.append(name)
    if bad:
        raise IngestionError(
            f"non-numeric feature columns: {', '.join(bad)}", columns=tuple(bad)
        )

    labels = []
    for v in columns[-1]:
        try:
            f = float(v)
        except ValueError:
            raise IngestionError(
                f"non-numeric label column: {header[-1]}", columns=(header[-1],)
            ) from None
        if f != int(f):
            raise IngestionError(
                f"label column {header[-1]!r} contains non-integer value {v!r}",
                columns=(header[-1],),
            )
        labels.append(int(f))
    if min(labels) < 0:
        raise IngestionError("labels must be non-negative integers")

    features = np.array(parsed, dtype=np.float64).T
    return Dataset(features, np.array(labels, dtype=np.int64))


def save_csv(data: Dataset, path: str | os.PathLike) -> None:
    """Write a dataset in the same schema load_csv reads (exact float round-trip)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"x{j}" for j in range(data.feature_count)] + ["label"])
        for x, y in zip(data.features, data.labels):
            writer.writerow([repr(float(v)) for v in x] + [int(y)])
