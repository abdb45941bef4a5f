"""Non-private MICe and MICr statistics."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from dpmic.grid import (
    CountMatrix,
    Dataset,
    RangeBounds,
    mass_equipartition,
    range_equipartition,
    stable_ranks,
)
from dpmic.info import optimize_axis


class MasterSizing(enum.Enum):
    """How many rows the master partition gets for a k <= l entry.

    FULL always uses ceil(c * l). CLUMPED switches to ceil(c * B / l) once
    l exceeds sqrt(B), which is far cheaper for large B.
    """

    FULL = "full"
    CLUMPED = "clumped"


class Family(enum.Enum):
    MASS = "mass"
    RANGE = "range"


def b_of(n: int, alpha: float) -> int:
    """Maximum grid size ``floor(n ** alpha)``."""
    return int(math.floor(n ** alpha + 1e-9))


@dataclass(frozen=True)
class EstimatorParams:
    B: int
    c: float = 5.0
    master_sizing: MasterSizing = MasterSizing.FULL

    def __post_init__(self):
        if int(self.B) != self.B or self.B < 4:
            raise ValueError(f"B must be an integer >= 4, got {self.B}")
        if not self.c > 0:
            raise ValueError(f"c must be positive, got {self.c}")
        if isinstance(self.master_sizing, str):
            object.__setattr__(self, "master_sizing", MasterSizing(self.master_sizing))

    def master_size(self, ell: int) -> int:
        """Master row count used for entries with l columns (k <= l)."""
        if self.master_sizing is MasterSizing.CLUMPED and ell * ell > self.B:
            return int(math.ceil(self.c * self.B / ell - 1e-9))
        return int(math.ceil(self.c * ell - 1e-9))


@dataclass
class CharacteristicMatrix:
    """Entries (k, l) -> I* for every evaluated pair with k*l <= B."""

    entries: dict[tuple[int, int], float] = field(default_factory=dict)
    degenerate: list[tuple[str, int]] = field(default_factory=list)

    @property
    def max_entry(self) -> tuple[int, int, float]:
        if not self.entries:
            raise ValueError("characteristic matrix has no entries")
        best_key, best = None, -1.0
        for key in sorted(self.entries):
            if self.entries[key] > best:
                best_key, best = key, self.entries[key]
        return (best_key[0], best_key[1], best)

    @property
    def value(self) -> float:
        return self.max_entry[2]

    def as_array(self) -> np.ndarray:
        """Dense matrix indexed [k, l] with NaN for absent entries."""
        kmax = max(k for k, _ in self.entries)
        lmax = max(l for _, l in self.entries)
        out = np.full((kmax + 1, lmax + 1), np.nan)
        for (k, l), v in self.entries.items():
            out[k, l] = v
        return out


# Receives (master counts, side, master key) and returns the counts to optimize.
MatrixHook = Callable[[CountMatrix, str, int], CountMatrix]


class _Side:
    """One orientation of the computation: columns fixed, rows optimized."""

    def __init__(self, xs, ys, family: Family, x_range=None, y_range=None):
        self.family = family
        self.n = xs.size
        if family is Family.MASS:
            self.xs = stable_ranks(xs).astype(float)
            self.ys = stable_ranks(ys).astype(float)
        else:
            self.xs, self.ys = xs, ys
        self.x_range, self.y_range = x_range, y_range

    def _labels(self, values, value_range, parts):
        if self.family is Family.MASS:
            return mass_equipartition(values, parts).locate(values)
        return range_equipartition(value_range[0], value_range[1], parts).locate(values)

    def feasible(self, ell: int, master: int) -> Optional[int]:
        """Master size actually usable for l columns, or None to skip l."""
        if self.family is Family.MASS:
            if ell > self.n:
                return None
            master = min(master, self.n)
        return master

    def master_counts(self, ell: int, master: int) -> CountMatrix:
        cols = self._labels(self.xs, self.x_range, ell)
        rows = self._labels(self.ys, self.y_range, master)
        flat = np.bincount(rows * ell + cols, minlength=master * ell)
        return CountMatrix(flat.reshape(master, ell))


def _fill_side(side: _Side, params: EstimatorParams, cm: CharacteristicMatrix,
               name: str, swap: bool, hook: Optional[MatrixHook]) -> None:
    B = params.B
    for ell in range(2, B // 2 + 1):
        k_max = min(ell, B // ell)
        if swap:
            # Mirrored pass only contributes k > l entries of the original.
            k_max = min(k_max, ell - 1)
        if k_max < 2:
            continue
        master = side.feasible(ell, params.master_size(ell))
        if master is None:
            continue
        if master < k_max:
            raise ValueError(
                f"master size {master} < {k_max} rows needed for l={ell}; increase c")
        counts = side.master_counts(ell, master)
        if hook is not None:
            counts = hook(counts, name, ell)
            if counts.total == 0:
                cm.degenerate.append((name, ell))
                for k in range(2, k_max + 1):
                    cm.entries[(ell, k) if swap else (k, ell)] = 0.0
                continue
        opt = optimize_axis(counts, k_max)
        for k, mi in opt.per_k.items():
            value = min(max(mi / math.log2(k), 0.0), 1.0)
            cm.entries[(ell, k) if swap else (k, ell)] = value


def characteristic_matrix(dataset: Dataset, params: EstimatorParams, family: Family,
                          bounds: Optional[RangeBounds] = None,
                          hook: Optional[MatrixHook] = None) -> CharacteristicMatrix:
    """Equicharacteristic (MASS) or range-equicharacteristic (RANGE) matrix."""
    if family is Family.RANGE:
        bounds = _check_bounds(dataset, bounds)
        xr, yr = bounds.x, bounds.y
    else:
        xr = yr = None
    cm = CharacteristicMatrix()
    _fill_side(_Side(dataset.x, dataset.y, family, xr, yr), params, cm, "rows", False, hook)
    _fill_side(_Side(dataset.y, dataset.x, family, yr, xr), params, cm, "cols", True, hook)
    if not cm.entries:
        raise ValueError(f"no characteristic matrix entry computable for n={dataset.n}, "
                         f"B={params.B}")
    return cm


def _check_bounds(dataset: Dataset, bounds: Optional[RangeBounds]) -> RangeBounds:
    if bounds is None:
        bounds = dataset.bounds
    if bounds is None:
        raise ValueError("MICr needs range bounds fixed independently of the data")
    outside = np.flatnonzero(~bounds.contains(dataset.x, dataset.y))
    if outside.size:
        i = int(outside[0])
        raise ValueError(
            f"point {i} ({dataset.x[i]}, {dataset.y[i]}) lies outside bounds {bounds}")
    return bounds


def _check_n(dataset: Dataset, minimum: int = 4) -> None:
    if dataset.n < minimum:
        raise ValueError(f"need at least {minimum} points, got {dataset.n}")


def mice(dataset: Dataset, params: EstimatorParams) -> tuple[float, CharacteristicMatrix]:
    """MICe: maximize over subgrids of mass-equipartition masters."""
    _check_n(dataset)
    cm = characteristic_matrix(dataset, params, Family.MASS)
    return cm.value, cm


def micr(dataset: Dataset, bounds: Optional[RangeBounds],
         params: EstimatorParams) -> tuple[float, CharacteristicMatrix]:
    """MICr: maximize over subgrids of range-equipartition masters of ``bounds``.

    ``bounds`` is used as given; it is never tightened to fit the data.
    """
    _check_n(dataset)
    cm = characteristic_matrix(dataset, params, Family.RANGE, bounds)
    return cm.value, cm


def characteristic_entry(dataset: Dataset, bounds: Optional[RangeBounds], k: int, ell: int,
                         params: EstimatorParams, family: Family) -> float:
    """A single (k, l) entry, computed on its own (kl <= B is not required)."""
    if k < 2 or ell < 2:
        raise ValueError("k and l must be >= 2")
    if family is Family.RANGE:
        bounds = _check_bounds(dataset, bounds)
        xr, yr = bounds.x, bounds.y
    else:
        xr = yr = None
    if k <= ell:
        side, cols, rows = _Side(dataset.x, dataset.y, family, xr, yr), ell, k
    else:
        side, cols, rows = _Side(dataset.y, dataset.x, family, yr, xr), k, ell
    master = side.feasible(cols, params.master_size(cols))
    if master is None or master < rows:
        raise ValueError(f"entry ({k}, {ell}) is not computable for this dataset")
    opt = optimize_axis(side.master_counts(cols, master), rows)
    return min(max(opt.per_k[rows] / math.log2(rows), 0.0), 1.0)
