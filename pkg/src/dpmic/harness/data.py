"""CSV ingestion and range-bound construction for real-data collections."""

from __future__ import annotations

import csv
import enum
import itertools
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Optional

import numpy as np

from dpmic.grid import Dataset, RangeBounds

logger = logging.getLogger(__name__)

MISSING_TOKENS = frozenset({"", "na", "nan", "null", "none", "?"})


class PairingMode(enum.Enum):
    INDEX_VS_COLUMN = "index"
    ALL_PAIRS = "all"


class BoundsPolicy(enum.Enum):
    PER_COLUMN = "per-column"
    GLOBAL = "global"


@dataclass
class ColumnCollection:
    name: str
    columns: dict[str, np.ndarray]
    dropped_rows: int = 0
    pairing: PairingMode = PairingMode.ALL_PAIRS
    bounds_policy: BoundsPolicy = BoundsPolicy.PER_COLUMN
    _bounds_cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        lengths = {v.size for v in self.columns.values()}
        if len(lengths) > 1:
            raise ValueError("all columns must have the same length")
        for name, v in self.columns.items():
            if np.any(np.isnan(v)):
                raise ValueError(f"column {name!r} contains NaN")

    @property
    def n(self) -> int:
        return next(iter(self.columns.values())).size if self.columns else 0

    @property
    def names(self) -> list[str]:
        return list(self.columns)

    def column_bounds(self, name: str) -> tuple[float, float]:
        if name not in self._bounds_cache:
            if self.bounds_policy is BoundsPolicy.GLOBAL:
                allv = np.concatenate(list(self.columns.values()))
                self._bounds_cache[name] = padded_bounds(allv)
            else:
                self._bounds_cache[name] = padded_bounds(self.columns[name])
        return self._bounds_cache[name]

    def pair_specs(self) -> list[tuple[str, Optional[str]]]:
        """(y column, x column) per dataset; x is None for the row index."""
        if self.pairing is PairingMode.INDEX_VS_COLUMN:
            return [(name, None) for name in self.columns]
        return [(a, b) for a, b in itertools.combinations(self.columns, 2)]

    def dataset_id(self, spec: tuple[str, Optional[str]]) -> str:
        y, x = spec
        return f"index~{y}" if x is None else f"{x}~{y}"

    def build(self, spec: tuple[str, Optional[str]]) -> Dataset:
        """Dataset for one pair, with bounds set by the padding rule.

        Index datasets use x = 1..n with x bounds [0, n + 1].
        """
        y_name, x_name = spec
        y = self.columns[y_name]
        y_lo, y_hi = self.column_bounds(y_name)
        if x_name is None:
            x = np.arange(1, self.n + 1, dtype=float)
            x_lo, x_hi = 0.0, float(self.n + 1)
        else:
            x = self.columns[x_name]
            x_lo, x_hi = self.column_bounds(x_name)
        return Dataset(x, y, RangeBounds(x_lo, x_hi, y_lo, y_hi))

    def datasets(self) -> Iterator[tuple[str, Dataset]]:
        for spec in self.pair_specs():
            yield self.dataset_id(spec), self.build(spec)


def ingest_csv(path, pairing: PairingMode | str = PairingMode.ALL_PAIRS,
               bounds_policy: BoundsPolicy | str = BoundsPolicy.PER_COLUMN,
               columns: Optional[list[str]] = None) -> ColumnCollection:
    """Read a headed numeric CSV; rows with a missing cell are dropped."""
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        if len(set(header)) != len(header):
            raise ValueError(f"{path}: duplicate column names in header")
        keep = list(range(len(header))) if columns is None else [
            header.index(c) for c in columns]
        rows, dropped = [], 0
        for line_no, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise ValueError(
                    f"{path}: row {line_no} has {len(row)} cells, expected {len(header)}")
            cells = [row[i].strip() for i in keep]
            if any(c.lower() in MISSING_TOKENS for c in cells):
                dropped += 1
                continue
            parsed = []
            for i, c in zip(keep, cells):
                try:
                    parsed.append(float(c))
                except ValueError:
                    raise ValueError(
                        f"{path}: cannot parse {c!r} at row {line_no}, column "
                        f"{i + 1} ({header[i]!r})") from None
            rows.append(parsed)
    if dropped:
        logger.info("%s: dropped %d rows with missing values", path, dropped)
    data = np.array(rows, dtype=float).reshape(len(rows), len(keep))
    cols = {header[i]: data[:, j].copy() for j, i in enumerate(keep)}
    return ColumnCollection(path.stem, cols, dropped, PairingMode(pairing),
                            BoundsPolicy(bounds_policy))


def padded_bounds(values) -> tuple[float, float]:
    """``(min - span/100, max + span/100)`` for a nonconstant column."""
    v = np.asarray(values, dtype=float)
    lo, hi = float(v.min()), float(v.max())
    span = abs(hi - lo)
    if span == 0:
        raise ValueError("constant column: supply range bounds explicitly")
    return lo - span / 100, hi + span / 100
