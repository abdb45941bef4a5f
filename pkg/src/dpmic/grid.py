"""Datasets, axis partitions, grids and count matrices.

Cell membership convention: every part of an axis partition is half-open
``[b_i, b_{i+1})`` except the last, which is closed. Row index 0 of a count
matrix is the lowest y-interval.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np


def _frozen(a, dtype=float) -> np.ndarray:
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class RangeBounds:
    """Closed rectangle ``[x_lo, x_hi] x [y_lo, y_hi]``."""

    x_lo: float
    x_hi: float
    y_lo: float
    y_hi: float

    def __post_init__(self):
        for name in ("x_lo", "x_hi", "y_lo", "y_hi"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if not self.x_lo < self.x_hi:
            raise ValueError(f"degenerate x range [{self.x_lo}, {self.x_hi}]")
        if not self.y_lo < self.y_hi:
            raise ValueError(f"degenerate y range [{self.y_lo}, {self.y_hi}]")

    @property
    def x(self) -> tuple[float, float]:
        return (self.x_lo, self.x_hi)

    @property
    def y(self) -> tuple[float, float]:
        return (self.y_lo, self.y_hi)

    def transposed(self) -> "RangeBounds":
        return RangeBounds(self.y_lo, self.y_hi, self.x_lo, self.x_hi)

    def contains(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        return (x >= self.x_lo) & (x <= self.x_hi) & (y >= self.y_lo) & (y <= self.y_hi)

    @classmethod
    def parse(cls, text: str) -> "RangeBounds":
        """Parse ``"x_lo,x_hi,y_lo,y_hi"``."""
        parts = [float(p) for p in text.split(",")]
        if len(parts) != 4:
            raise ValueError(f"expected 4 comma-separated numbers, got {text!r}")
        return cls(*parts)


@dataclass(frozen=True, eq=False)
class Dataset:
    """A sequence of n points in the plane, optionally with range bounds."""

    x: np.ndarray
    y: np.ndarray
    bounds: Optional[RangeBounds] = None

    def __post_init__(self):
        x = _frozen(self.x)
        y = _frozen(self.y)
        if x.ndim != 1 or y.ndim != 1 or x.shape != y.shape:
            raise ValueError("x and y must be 1-D sequences of equal length")
        if x.size < 1:
            raise ValueError("a dataset needs at least one point")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise ValueError("dataset contains non-finite coordinates")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        if self.bounds is not None:
            outside = np.flatnonzero(~self.bounds.contains(x, y))
            if outside.size:
                i = int(outside[0])
                raise ValueError(
                    f"point {i} ({x[i]}, {y[i]}) lies outside bounds {self.bounds}")

    @classmethod
    def from_points(cls, points: Sequence[tuple[float, float]],
                    bounds: Optional[RangeBounds] = None) -> "Dataset":
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        return cls(pts[:, 0], pts[:, 1], bounds)

    @property
    def n(self) -> int:
        return int(self.x.size)

    def transposed(self) -> "Dataset":
        """Swap the roles of the two axes."""
        bounds = None if self.bounds is None else self.bounds.transposed()
        return Dataset(self.y, self.x, bounds)

    def with_bounds(self, bounds: Optional[RangeBounds]) -> "Dataset":
        return Dataset(self.x, self.y, bounds)

    def replace_point(self, index: int, x: float, y: float) -> "Dataset":
        """Return the neighboring dataset with point ``index`` moved to (x, y)."""
        xs = self.x.copy()
        ys = self.y.copy()
        xs[index] = x
        ys[index] = y
        return Dataset(xs, ys, self.bounds)

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (self.bounds == other.bounds and np.array_equal(self.x, other.x)
                and np.array_equal(self.y, other.y))

    __hash__ = None


@dataclass(frozen=True, eq=False)
class AxisPartition:
    """Ordered interval partition of one axis given by its k+1 boundaries."""

    boundaries: np.ndarray

    def __post_init__(self):
        b = _frozen(self.boundaries)
        if b.ndim != 1 or b.size < 2:
            raise ValueError("a partition needs at least two boundaries")
        if not np.all(np.isfinite(b)):
            raise ValueError("partition boundaries must be finite")
        if not np.all(np.diff(b) > 0):
            raise ValueError("partition boundaries must be strictly increasing")
        object.__setattr__(self, "boundaries", b)

    @property
    def size(self) -> int:
        return int(self.boundaries.size - 1)

    @property
    def lo(self) -> float:
        return float(self.boundaries[0])

    @property
    def hi(self) -> float:
        return float(self.boundaries[-1])

    def locate(self, values) -> np.ndarray:
        """Part index of each value; -1 for values outside the covered interval."""
        v = np.asarray(values, dtype=float)
        b = self.boundaries
        idx = np.searchsorted(b, v, side="right") - 1
        idx = np.where(v == b[-1], self.size - 1, idx)
        idx = np.where((v < b[0]) | (v > b[-1]), -1, idx)
        return idx.astype(np.intp)

    def is_subpartition_of(self, master: "AxisPartition") -> bool:
        if self.lo != master.lo or self.hi != master.hi:
            return False
        return bool(np.all(np.isin(self.boundaries, master.boundaries)))

    def dividers_in(self, master: "AxisPartition") -> np.ndarray:
        """Indices into ``master.boundaries`` of this partition's boundaries."""
        if not self.is_subpartition_of(master):
            raise ValueError("partition is not aligned with the master partition")
        return np.searchsorted(master.boundaries, self.boundaries)

    def __eq__(self, other):
        if not isinstance(other, AxisPartition):
            return NotImplemented
        return np.array_equal(self.boundaries, other.boundaries)

    __hash__ = None

    def __repr__(self):
        return f"AxisPartition({self.boundaries.tolist()})"


@dataclass(frozen=True)
class Grid:
    """A k x l grid: ``rows`` partitions the y-axis, ``cols`` the x-axis."""

    rows: AxisPartition
    cols: AxisPartition

    @property
    def shape(self) -> tuple[int, int]:
        return (self.rows.size, self.cols.size)

    def transposed(self) -> "Grid":
        return Grid(rows=self.cols, cols=self.rows)

    def cell_of(self, x, y) -> tuple[np.ndarray, np.ndarray]:
        return self.rows.locate(y), self.cols.locate(x)


@dataclass(frozen=True, eq=False)
class CountMatrix:
    """Integer cell counts; ``counts[i, j]`` is row i (y) and column j (x)."""

    counts: np.ndarray

    def __post_init__(self):
        a = np.array(self.counts, copy=True)
        if a.ndim != 2:
            raise ValueError("count matrix must be 2-D")
        if a.dtype.kind not in "iu":
            if not np.all(a == np.round(a)):
                raise ValueError("count matrix entries must be integers")
            a = a.astype(np.int64)
        else:
            a = a.astype(np.int64)
        if np.any(a < 0):
            raise ValueError("count matrix entries must be nonnegative")
        a.setflags(write=False)
        object.__setattr__(self, "counts", a)

    @property
    def shape(self) -> tuple[int, int]:
        return self.counts.shape

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def normalized(self) -> np.ndarray:
        """The normalized count matrix ``counts / total``."""
        n = self.total
        if n == 0:
            raise ValueError("cannot normalize an all-zero count matrix")
        return self.counts / n

    def transposed(self) -> "CountMatrix":
        return CountMatrix(self.counts.T)

    def __eq__(self, other):
        if not isinstance(other, CountMatrix):
            return NotImplemented
        return np.array_equal(self.counts, other.counts)

    __hash__ = None


def range_equipartition(lo: float, hi: float, parts: int) -> AxisPartition:
    """Size-``parts`` partition of ``[lo, hi]`` into equal-width intervals."""
    if not lo < hi:
        raise ValueError(f"degenerate interval [{lo}, {hi}]")
    if parts < 1:
        raise ValueError("parts must be >= 1")
    i = np.arange(parts + 1)
    b = lo + i * ((hi - lo) / parts)
    b[-1] = hi
    return AxisPartition(b)


def mass_part_sizes(n: int, parts: int) -> np.ndarray:
    """Number of points in each part of a size-``parts`` mass equipartition.

    Parts 1..parts-1 take ``ceil(n / parts)`` points and the last part the
    remainder. When that would leave later parts empty (e.g. n=7, parts=5)
    each part takes ``ceil(n / parts)`` capped so that every later part still
    receives at least one point.
    """
    if n < 1:
        raise ValueError("need at least one value")
    if parts < 1:
        raise ValueError("parts must be >= 1")
    if parts > n:
        raise ValueError(f"cannot split {n} values into {parts} nonempty parts")
    per = -(-n // parts)
    sizes = np.empty(parts, dtype=np.int64)
    remaining = n
    for i in range(parts - 1):
        s = min(per, remaining - (parts - 1 - i))
        sizes[i] = s
        remaining -= s
    sizes[-1] = remaining
    return sizes


def stable_ranks(values) -> np.ndarray:
    """Ranks 0..n-1 with ties broken by original index.

    This is the deterministic stand-in for perturbing every point by an
    infinitesimal amount so that all coordinates become distinct.
    """
    v = np.asarray(values, dtype=float)
    order = np.argsort(v, kind="stable")
    ranks = np.empty(v.size, dtype=np.int64)
    ranks[order] = np.arange(v.size)
    return ranks


def mass_equipartition(values, parts: int) -> AxisPartition:
    """Mass equipartition of ``values`` expressed in stable-rank coordinates.

    The returned partition covers ``[-0.5, n - 0.5]``; its internal
    boundaries sit at half-integers, i.e. midway between adjacent ranked
    values. Apply it to ``stable_ranks(values)``: part sizes then follow
    :func:`mass_part_sizes` exactly, even when values are tied.
    """
    v = np.asarray(values, dtype=float).ravel()
    if v.size == 0:
        raise ValueError("cannot partition an empty sequence")
    sizes = mass_part_sizes(v.size, parts)
    b = np.concatenate(([0], np.cumsum(sizes))) - 0.5
    return AxisPartition(b.astype(float))


def rank_dataset(dataset: Dataset) -> Dataset:
    """Replace both coordinates by their stable ranks (bounds dropped)."""
    return Dataset(stable_ranks(dataset.x).astype(float),
                   stable_ranks(dataset.y).astype(float))


def cell_indices(dataset: Dataset, grid: Grid) -> tuple[np.ndarray, np.ndarray]:
    """Row and column index of every point; raises on points outside the grid."""
    rows, cols = grid.cell_of(dataset.x, dataset.y)
    bad = np.flatnonzero((rows < 0) | (cols < 0))
    if bad.size:
        i = int(bad[0])
        raise ValueError(
            f"point {i} ({dataset.x[i]}, {dataset.y[i]}) lies outside the grid")
    return rows, cols


def count_matrix(dataset: Dataset, grid: Grid) -> CountMatrix:
    rows, cols = cell_indices(dataset, grid)
    k, l = grid.shape
    flat = np.bincount(rows * l + cols, minlength=k * l)
    return CountMatrix(flat.reshape(k, l))


def coarsen_rows(counts: np.ndarray, dividers) -> np.ndarray:
    """Sum blocks of adjacent rows; ``dividers`` are row offsets 0 < ... < k̂."""
    d = np.asarray(dividers, dtype=np.intp)
    starts = np.concatenate(([0], d))
    return np.add.reduceat(counts, starts, axis=0)


def coarsen(master_counts: CountMatrix, master: Grid, sub: Grid) -> CountMatrix:
    """Count matrix of an aligned subgrid obtained by summing master blocks."""
    if master_counts.shape != master.shape:
        raise ValueError("count matrix shape does not match the master grid")
    rdiv = sub.rows.dividers_in(master.rows)
    cdiv = sub.cols.dividers_in(master.cols)
    a = np.add.reduceat(master_counts.counts, rdiv[:-1], axis=0)
    a = np.add.reduceat(a, cdiv[:-1], axis=1)
    return CountMatrix(a)


def subpartition_count(master_size: int, parts: int) -> int:
    """Number of size-``parts`` subpartitions of a size-``master_size`` partition."""
    if parts < 2:
        raise ValueError("parts must be >= 2")
    if parts > master_size:
        raise ValueError(f"cannot choose {parts} parts out of {master_size}")
    return math.comb(master_size - 1, parts - 1)
