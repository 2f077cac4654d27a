"""CSV ingestion for explanation runs."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

__all__ = ["Dataset", "DatasetError", "load_csv"]


class DatasetError(ValueError):
    """The CSV file does not describe a rectangular numeric dataset."""


@dataclass(frozen=True)
class Dataset:
    """Numeric feature matrix with named columns and an optional label column."""

    columns: tuple[str, ...]
    rows: np.ndarray
    labels: np.ndarray | None = None
    label_column: str | None = None

    def __post_init__(self):
        rows = np.array(self.rows, dtype=np.float64)
        if rows.ndim != 2 or rows.shape[0] == 0:
            raise DatasetError("dataset needs at least one data row")
        if rows.shape[1] != len(self.columns):
            raise DatasetError("column names do not match the matrix width")
        if not np.all(np.isfinite(rows)):
            raise DatasetError("dataset values must be finite")
        rows.flags.writeable = False
        object.__setattr__(self, "rows", rows)
        if self.labels is not None:
            labels = np.array(self.labels, dtype=np.float64)
            if labels.shape != (rows.shape[0],):
                raise DatasetError("labels must align with data rows")
            labels.flags.writeable = False
            object.__setattr__(self, "labels", labels)

    @property
    def dim(self) -> int:
        return self.rows.shape[1]

    def __len__(self) -> int:
        return self.rows.shape[0]


def load_csv(path, label_column: str | None = None) -> Dataset:
    """Parse a headed CSV of finite decimal numbers.

    The first line names the columns. Parsing uses plain float literals
    and is locale independent. Ragged rows and non-numeric cells raise
    :class:`DatasetError` citing the file line and column. When
    ``label_column`` is given, that column is split out of the feature
    matrix and exposed as labels.
    """
    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DatasetError(f"{path}: empty file, expected a header line") from None
        header = [name.strip() for name in header]
        if len(set(header)) != len(header):
            raise DatasetError(f"{path}: duplicate column names in header")
        label_idx = None
        if label_column is not None:
            if label_column not in header:
                raise DatasetError(f"{path}: no column named {label_column!r}")
            label_idx = header.index(label_column)
        parsed: list[list[float]] = []
        for line_no, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise DatasetError(
                    f"{path}: line {line_no} has {len(row)} cells, expected {len(header)}"
                )
            values = []
            for col_idx, cell in enumerate(row):
                try:
                    value = float(cell)
                except ValueError:
                    raise DatasetError(
                        f"{path}: line {line_no}, column {header[col_idx]!r}: "
                        f"{cell!r} is not a number"
                    ) from None
                if not np.isfinite(value):
                    raise DatasetError(
                        f"{path}: line {line_no}, column {header[col_idx]!r}: "
                        f"{cell!r} is not finite"
                    )
                values.append(value)
            parsed.append(values)
    if not parsed:
        raise DatasetError(f"{path}: no data rows")
    matrix = np.array(parsed, dtype=np.float64)
    if label_idx is None:
        return Dataset(columns=tuple(header), rows=matrix)
    feature_cols = [i for i in range(len(header)) if i != label_idx]
    return Dataset(
        columns=tuple(header[i] for i in feature_cols),
        rows=matrix[:, feature_cols],
        labels=matrix[:, label_idx],
        label_column=label_column,
    )
