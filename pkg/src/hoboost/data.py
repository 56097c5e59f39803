"""Column-oriented datasets with per-feature sort order computed at load."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np


class DataError(ValueError):
    pass


class CSVParseError(DataError):
    pass


class MissingValueError(DataError):
    pass


class LabelDomainError(DataError):
    pass


def _sort_index(columns: np.ndarray) -> np.ndarray:
    # stable so that equal values keep file order; the split scan relies on a fixed order
    return np.argsort(columns, axis=1, kind="stable").astype(np.int64)


@dataclass(frozen=True, eq=False)
class Dataset:
    """Feature matrix stored one row per feature, shape ``(n_features, n_rows)``.

    ``sort_index[f]`` lists row ids in ascending order of feature ``f``.
    """

    columns: np.ndarray
    labels: np.ndarray
    feature_names: tuple[str, ...] = ()
    sort_index: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        columns = np.ascontiguousarray(self.columns, dtype=np.float64)
        labels = np.ascontiguousarray(self.labels, dtype=np.float64)
        if columns.ndim != 2:
            raise DataError("columns must be a 2-d array (n_features, n_rows)")
        if labels.shape != (columns.shape[1],):
            raise DataError(
                f"label array has {labels.size} entries, expected {columns.shape[1]}"
            )
        if not np.all(np.isfinite(columns)) or not np.all(np.isfinite(labels)):
            raise MissingValueError("dataset contains NaN or infinite values")
        names = tuple(self.feature_names) or tuple(f"f{i}" for i in range(columns.shape[0]))
        if len(names) != columns.shape[0]:
            raise DataError("feature_names length does not match the number of columns")
        columns.setflags(write=False)
        labels.setflags(write=False)
        sort_index = _sort_index(columns)
        sort_index.setflags(write=False)
        object.__setattr__(self, "columns", columns)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "feature_names", names)
        object.__setattr__(self, "sort_index", sort_index)

    @property
    def n_rows(self) -> int:
        return self.columns.shape[1]

    @property
    def n_features(self) -> int:
        return self.columns.shape[0]

    @classmethod
    def from_rows(cls, features, labels, feature_names: Sequence[str] = ()) -> "Dataset":
        """Build from a row-major ``(n_rows, n_features)`` array."""
        features = np.asarray(features, dtype=np.float64)
        if features.ndim == 1:
            features = features[:, None]
        return cls(features.T, labels, tuple(feature_names))

    def rows(self) -> np.ndarray:
        """Row-major copy of the features, shape ``(n_rows, n_features)``."""
        return np.ascontiguousarray(self.columns.T)

    def subset(self, indices) -> "Dataset":
        idx = as_rowset(indices, self.n_rows)
        return Dataset(self.columns[:, idx], self.labels[idx], self.feature_names)

    def check_binary_labels(self) -> None:
        bad = (self.labels != 0.0) & (self.labels != 1.0)
        if np.any(bad):
            row = int(np.flatnonzero(bad)[0])
            raise LabelDomainError(
                f"label {self.labels[row]!r} at row {row} is not in {{0, 1}}"
            )


def as_rowset(indices, n_rows: int) -> np.ndarray:
    """Validate a set of row ids: unique and inside ``[0, n_rows)``."""
    idx = np.asarray(indices, dtype=np.int64)
    if idx.ndim != 1:
        raise DataError("row set must be one-dimensional")
    if idx.size and (idx.min() < 0 or idx.max() >= n_rows):
        raise DataError("row index out of range")
    if np.unique(idx).size != idx.size:
        raise DataError("row set contains duplicates")
    return idx


def _parse_cell(text: str, line: int, col: int) -> float:
    stripped = text.strip()
    if not stripped:
        raise MissingValueError(f"empty cell at line {line}, column {col}")
    try:
        value = float(stripped)
    except ValueError:
        raise CSVParseError(
            f"non-numeric cell {stripped!r} at line {line}, column {col}"
        ) from None
    if math.isnan(value):
        raise MissingValueError(f"NaN cell at line {line}, column {col}")
    if math.isinf(value):
        raise CSVParseError(f"infinite value at line {line}, column {col}")
    return value


def load_csv(
    path,
    label_column: str | int | None = -1,
    has_header: bool = True,
    max_rows: int | None = None,
    binary_labels: bool = True,
) -> Dataset:
    """Read a numeric CSV file into a :class:`Dataset`.

    ``label_column`` is a header name (requires ``has_header``) or a 0-based
    index; negative indices count from the end. ``max_rows`` keeps only the
    first rows of the file, which is how large public datasets get
    downsampled. With ``label_column=None`` every column is a feature and the
    labels are zero. Missing values are rejected rather than imputed.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = None
        if has_header:
            try:
                header = [h.strip() for h in next(reader)]
            except StopIteration:
                raise CSVParseError(f"{path}: file is empty") from None
        records: list[list[float]] = []
        width = len(header) if header is not None else None
        first_line = 2 if has_header else 1
        for line_no, row in enumerate(reader, start=first_line):
            if max_rows is not None and len(records) >= max_rows:
                break
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if width is None:
                width = len(row)
            if len(row) != width:
                raise CSVParseError(
                    f"{path}: line {line_no} has {len(row)} cells, expected {width}"
                )
            records.append([_parse_cell(c, line_no, j) for j, c in enumerate(row)])

    if width is None:
        raise CSVParseError(f"{path}: no columns found")
    if label_column is None:
        table = np.array(records, dtype=np.float64).reshape(len(records), width)
        return Dataset(table.T, np.zeros(len(records)), tuple(header or ()))
    if isinstance(label_column, str) and not label_column.lstrip("-").isdigit():
        if header is None:
            raise CSVParseError("label column given by name but the file has no header")
        if label_column not in header:
            raise CSVParseError(f"label column {label_column!r} not in header")
        label_idx = header.index(label_column)
    else:
        label_idx = int(label_column)
        if not -width <= label_idx < width:
            raise CSVParseError(f"label column index {label_idx} out of range")
        label_idx %= width
    if width < 2:
        raise CSVParseError("need at least one feature column besides the label")

    table = np.array(records, dtype=np.float64).reshape(len(records), width)
    feature_idx = [j for j in range(width) if j != label_idx]
    names = tuple(header[j] for j in feature_idx) if header is not None else ()
    ds = Dataset(table[:, feature_idx].T, table[:, label_idx], names)
    if binary_labels:
        ds.check_binary_labels()
    return ds


def write_csv(dataset: Dataset, path, label_name: str = "label") -> None:
    """Write features then the label column, with a header row.

    Floats are written with ``repr`` so that :func:`load_csv` restores them
    bit for bit.
    """
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([*dataset.feature_names, label_name])
        for row, label in zip(dataset.rows(), dataset.labels):
            writer.writerow([repr(float(v)) for v in row] + [repr(float(label))])


def make_synthetic(n_rows: int, n_features: int, seed: int) -> Dataset:
    """Binary classification data with a nonlinear decision rule and label noise.

    Features are standard normal. The label is the sign of a fixed
    combination of a sine, a pairwise interaction, a step and a quadratic
    term plus logistic noise, so accuracy well above chance is reachable but
    not perfect. Feature indices wrap around when ``n_features`` is small.
    """
    if n_rows < 2:
        raise DataError("n_rows must be >= 2")
    if n_features < 1:
        raise DataError("n_features must be >= 1")
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n_features, n_rows))

    def col(j):
        return x[j % n_features]

    logit = (
        2.0 * np.sin(1.5 * col(0))
        + 1.5 * col(1) * col(2)
        + 1.0 * (col(3) > 0.5)
        - 0.5 * col(4) ** 2
        + 0.5
    )
    for j in range(5, min(n_features, 12)):
        logit += (0.6 if j % 2 else -0.6) * x[j]
    noise = rng.logistic(0.0, 0.5, n_rows)
    labels = (logit + noise > 0.0).astype(np.float64)
    return Dataset(x, labels)


def split_dataset(dataset: Dataset, fractions=(0.6, 0.2, 0.2), seed: int = 0):
    """Deterministic shuffled split into len(fractions) parts."""
    fractions = np.asarray(fractions, dtype=float)
    if np.any(fractions <= 0):
        raise DataError("split fractions must be positive")
    perm = np.random.default_rng(seed).permutation(dataset.n_rows)
    bounds = np.floor(np.cumsum(fractions / fractions.sum()) * dataset.n_rows).astype(int)
    bounds[-1] = dataset.n_rows
    parts, start = [], 0
    for stop in bounds:
        parts.append(dataset.subset(np.sort(perm[start:stop])))
        start = stop
    return tuple(parts)
