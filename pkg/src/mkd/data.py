"""Datasets and their ingestion from CSV/JSON files.

A :class:`Dataset` stands for the empirical distribution that puts mass
``1/n`` on each of its rows.  Samples are stored as a read-only ``(n, d)``
float array, so a dataset can be shared freely between threads.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DataIOError, EmptyError, ParseError, ShapeError

__all__ = [
    "Dataset",
    "as_samples",
    "concatenate",
    "load_csv",
    "load_data",
    "load_json",
    "save_csv",
    "split_replicates",
]


@dataclass(frozen=True, eq=False)
class Dataset:
    """An immutable ``n x d`` sample matrix (rows are observations)."""

    samples: np.ndarray

    def __post_init__(self):
        arr = np.array(self.samples, dtype=float, copy=True)
        if arr.ndim == 1:
            arr = arr[:, None]
        if arr.ndim != 2:
            raise ShapeError(f"samples must be a 2-d array, got shape {arr.shape}")
        if arr.shape[0] < 1:
            raise EmptyError("dataset has no rows")
        if arr.shape[1] < 1:
            raise ShapeError("dataset has zero columns")
        if not np.all(np.isfinite(arr)):
            i, j = np.argwhere(~np.isfinite(arr))[0]
            raise ParseError(int(i) + 1, int(j) + 1, "non-finite value in samples")
        arr.setflags(write=False)
        object.__setattr__(self, "samples", arr)

    @property
    def n(self) -> int:
        return self.samples.shape[0]

    @property
    def d(self) -> int:
        return self.samples.shape[1]

    def __len__(self):
        return self.n

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self.samples
        return self.samples.astype(dtype)

    def __repr__(self):
        return f"Dataset(n={self.n}, d={self.d})"


def as_samples(data) -> np.ndarray:
    """Return ``data`` as a 2-d float array; a 1-d input becomes one column."""
    if isinstance(data, Dataset):
        return data.samples
    arr = np.asarray(data, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr[:, None]
    elif arr.ndim != 2:
        raise ShapeError(f"expected a 2-d sample array, got shape {arr.shape}")
    return arr


def _parse_cell(text, row, col, source):
    try:
        value = float(text)
    except ValueError:
        raise ParseError(row, col, f"{source}: row {row}, column {col}: "
                         f"{text.strip()!r} is not a number", source) from None
    if not math.isfinite(value):
        raise ParseError(row, col, f"{source}: row {row}, column {col}: "
                         f"non-finite value {text.strip()!r}", source)
    return value


def load_csv(path, has_header: bool = False) -> Dataset:
    """Read a comma-separated numeric file.

    Row and column numbers in error messages are 1-based file positions, so
    a header line counts as row 1.  Blank lines are ignored; quoting is not
    supported.
    """
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise DataIOError(f"cannot read {path}: {exc.strerror or exc}") from exc

    source = os.fspath(path)
    rows = []
    width = None
    for lineno, line in enumerate(lines, start=1):
        if has_header and lineno == 1:
            continue
        if not line.strip():
            continue
        cells = line.split(",")
        if width is None:
            width = len(cells)
        elif len(cells) != width:
            raise ShapeError(f"{source}: row {lineno} has {len(cells)} columns, expected {width}")
        rows.append([_parse_cell(c, lineno, j, source) for j, c in enumerate(cells, start=1)])
    if not rows:
        raise EmptyError(f"{source}: no data rows")
    return Dataset(np.array(rows, dtype=float))


def load_json(path) -> Dataset:
    """Read a JSON document holding an array of equal-length numeric arrays."""
    source = os.fspath(path)
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise DataIOError(f"cannot read {path}: {exc.strerror or exc}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(exc.lineno, exc.colno, f"{source}: invalid JSON: {exc.msg}", source) from exc

    if not isinstance(doc, list):
        raise ShapeError(f"{source}: top level must be an array of rows")
    if not doc:
        raise EmptyError(f"{source}: no data rows")
    width = None
    rows = []
    for i, row in enumerate(doc, start=1):
        if not isinstance(row, list):
            raise ShapeError(f"{source}: row {i} is not an array")
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise ShapeError(f"{source}: row {i} has {len(row)} entries, expected {width}")
        values = []
        for j, v in enumerate(row, start=1):
            if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
                raise ParseError(i, j, f"{source}: row {i}, column {j}: {v!r} is not a finite number", source)
            values.append(float(v))
        rows.append(values)
    if width == 0:
        raise ShapeError(f"{source}: rows are empty")
    return Dataset(np.array(rows, dtype=float))


def load_data(path, has_header: bool = False) -> Dataset:
    """Dispatch on file extension: ``.json`` goes to :func:`load_json`, anything else is CSV."""
    if os.fspath(path).lower().endswith(".json"):
        return load_json(path)
    return load_csv(path, has_header=has_header)


def save_csv(ds: Dataset, path, header: Sequence[str] | None = None) -> None:
    """Write ``ds`` with 17 significant digits, which round-trips doubles exactly."""
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            if header is not None:
                fh.write(",".join(header) + "\n")
            for row in as_samples(ds):
                fh.write(",".join(f"{v:.17g}" for v in row) + "\n")
    except OSError as exc:
        raise DataIOError(f"cannot write {path}: {exc.strerror or exc}") from exc


def split_replicates(ds: Dataset, r: int) -> list[Dataset]:
    """Split ``ds`` into ``r`` contiguous, equally sized datasets."""
    if r < 1:
        raise ShapeError(f"number of replicates must be >= 1, got {r}")
    if ds.n % r:
        raise ShapeError(f"{r} replicates do not divide n={ds.n}")
    if r == 1:
        return [ds]
    size = ds.n // r
    return [Dataset(ds.samples[i * size:(i + 1) * size]) for i in range(r)]


def concatenate(datasets: Sequence[Dataset]) -> Dataset:
    """Stack datasets row-wise, preserving order."""
    if not datasets:
        raise EmptyError("nothing to concatenate")
    return Dataset(np.concatenate([as_samples(d) for d in datasets], axis=0))
