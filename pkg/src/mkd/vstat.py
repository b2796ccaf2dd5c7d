"""V- and U-statistics of symmetric bivariate functions.

The bivariate function is supplied in *block* form: ``v(X, Y)`` receives two
sample blocks of shapes ``(a, d)`` and ``(b, d)`` and returns an array of
shape ``(a, b, *value_shape)`` whose ``[i, j]`` entry is ``v(X[i], Y[j])``.
Scalar statistics have ``value_shape == ()``.  The caller is responsible for
``v`` being symmetric, ``v(x, y) == v(y, x)``.

Rows are cut into fixed-size blocks.  Each unordered pair of distinct
blocks is evaluated once and counted twice; diagonal blocks are evaluated
in full and supply the diagonal terms ``v(x_i, x_i)``.  Block sums are
merged with Neumaier compensated summation in a fixed order.

A degenerate statistic (zero conditional variance) is not special-cased:
:func:`conditional_mean_variance` simply returns a (near) zero value.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .data import as_samples
from .errors import ShapeError
from .parallel import ordered_map

__all__ = [
    "BivariateStatistic",
    "conditional_mean_variance",
    "pointwise",
    "row_means",
    "u_statistic",
    "v_statistic",
    "vu_parts",
]

BLOCK = 512


@dataclass(frozen=True)
class BivariateStatistic:
    """A symmetric block function ``v`` paired with a dataset."""

    v: Callable[[np.ndarray, np.ndarray], np.ndarray]
    dataset: object

    @property
    def samples(self) -> np.ndarray:
        return as_samples(self.dataset)


def pointwise(f):
    """Lift a point function ``f(x, y)`` to block form by explicit loops.

    Handy for tests and small ad hoc statistics; production code passes
    vectorised block functions directly.
    """

    def v(X, Y):
        rows = [[np.asarray(f(x, y), dtype=float) for y in Y] for x in X]
        return np.array(rows, dtype=float)

    return v


class _Neumaier:
    """Elementwise compensated accumulator for arrays of a fixed shape."""

    def __init__(self):
        self.s = None
        self.c = None

    def add(self, x):
        x = np.asarray(x, dtype=float)
        if self.s is None:
            self.s = x.copy()
            self.c = np.zeros_like(self.s)
            return
        t = self.s + x
        big = np.abs(self.s) >= np.abs(x)
        self.c += np.where(big, (self.s - t) + x, (x - t) + self.s)
        self.s = t

    def value(self):
        return self.s + self.c


def _blocks(n, size=BLOCK):
    return [(lo, min(lo + size, n)) for lo in range(0, n, size)]


def _evaluate(stat, want_rows=False):
    X = stat.samples
    n = X.shape[0]
    blocks = _blocks(n)
    pairs = [(bi, bj) for bi in range(len(blocks)) for bj in range(bi, len(blocks))]

    def work(pair):
        bi, bj = pair
        (a0, a1), (b0, b1) = blocks[bi], blocks[bj]
        vals = np.asarray(stat.v(X[a0:a1], X[b0:b1]), dtype=float)
        if vals.shape[:2] != (a1 - a0, b1 - b0):
            raise ShapeError(f"block function returned shape {vals.shape}, "
                             f"expected leading dims {(a1 - a0, b1 - b0)}")
        total = vals.sum(axis=(0, 1))
        diag = np.diagonal(vals, axis1=0, axis2=1).sum(axis=-1) if bi == bj else None
        rows = cols = None
        if want_rows:
            rows = vals.sum(axis=1)
            cols = vals.sum(axis=0) if bi != bj else None
        return total, diag, rows, cols

    results = ordered_map(work, pairs)

    total, diag = _Neumaier(), _Neumaier()
    row_acc = [_Neumaier() for _ in blocks] if want_rows else None
    for (bi, bj), (t, dg, rows, cols) in zip(pairs, results):
        if bi == bj:
            total.add(t)
            diag.add(dg)
        else:
            total.add(2.0 * t)
        if want_rows:
            row_acc[bi].add(rows)
            if cols is not None:
                row_acc[bj].add(cols)
    row_sums = None
    if want_rows:
        row_sums = np.concatenate([acc.value() for acc in row_acc], axis=0)
    return total.value(), diag.value(), row_sums


def vu_parts(stat: BivariateStatistic):
    """Return ``(sum over all ordered pairs, sum of diagonal terms, n)``."""
    total, diag, _ = _evaluate(stat)
    return total, diag, stat.samples.shape[0]


def _finish(x):
    x = np.asarray(x, dtype=float)
    return float(x) if x.ndim == 0 else x


def v_statistic(stat: BivariateStatistic):
    """``(1/n^2) * sum_{i,j} v(x_i, x_j)``, diagonal included."""
    total, _, n = vu_parts(stat)
    return _finish(total / n**2)


def u_statistic(stat: BivariateStatistic):
    """``1/(n(n-1)) * sum_{i != j} v(x_i, x_j)``."""
    n = stat.samples.shape[0]
    if n < 2:
        raise ShapeError(f"U-statistic needs n >= 2, got n={n}")
    total, diag, _ = vu_parts(stat)
    return _finish((total - diag) / (n * (n - 1)))


def row_means(stat: BivariateStatistic) -> np.ndarray:
    """Per-row means ``g_i = (1/n) sum_j v(x_i, x_j)``, shape ``(n, *value_shape)``."""
    _, _, rows = _evaluate(stat, want_rows=True)
    return rows / stat.samples.shape[0]


def conditional_mean_variance(stat: BivariateStatistic):
    """Sample variance (divisor ``n - 1``) of the per-row means.

    For vector-valued statistics this is the sample covariance matrix of the
    row means.
    """
    n = stat.samples.shape[0]
    if n < 2:
        raise ShapeError(f"conditional variance needs n >= 2, got n={n}")
    g = row_means(stat)
    if g.ndim == 1:
        return float(np.var(g, ddof=1))
    g = g.reshape(n, -1)
    centered = g - g.mean(axis=0)
    return centered.T @ centered / (n - 1)
