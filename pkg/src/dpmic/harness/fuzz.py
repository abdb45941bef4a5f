"""Empirical sensitivity checks on random and adversarial neighboring datasets."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from dpmic.estimators import EstimatorParams, MasterSizing, b_of, mice, micr
from dpmic.grid import Dataset, RangeBounds, range_equipartition
from dpmic.mechanisms import mice_sensitivity, micr_sensitivity

STRATEGIES = ("identity", "random", "corner", "cross-boundary", "duplicate", "rank-step")
UNIT = RangeBounds(0.0, 1.0, 0.0, 1.0)


@dataclass
class FuzzReport:
    statistic: str
    n: int
    trials: int
    B: int
    c: float
    max_delta: float
    bound: float
    per_strategy: dict[str, float] = field(default_factory=dict)
    worst: Optional[dict] = None

    @property
    def cap(self) -> float:
        """The bound, or 1 when the bound is vacuous for a [0, 1] statistic."""
        return min(self.bound, 1.0)

    @property
    def passed(self) -> bool:
        return self.max_delta <= self.bound

    def summary(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        lines = [f"{verdict} {self.statistic} n={self.n} B={self.B} c={self.c:g} "
                 f"trials={self.trials} max|delta|={self.max_delta:.6f} "
                 f"bound={self.bound:.6f} cap={self.cap:.6f}"]
        for name in STRATEGIES:
            if name in self.per_strategy:
                lines.append(f"  {name:<15} {self.per_strategy[name]:.6f}")
        return "\n".join(lines)


def _random_dataset(n: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    kind = rng.integers(0, 5)
    x = rng.random(n)
    if kind == 0:
        y = rng.random(n)
    elif kind == 1:
        y = x + rng.normal(0, rng.uniform(0.0, 0.2), n)
    elif kind == 2:
        y = 0.5 + 0.4 * np.sin(rng.uniform(2, 12) * np.pi * x) + rng.normal(0, 0.05, n)
    elif kind == 3:
        centres = rng.random((3, 2))
        pick = rng.integers(0, 3, n)
        x = centres[pick, 0] + rng.normal(0, 0.03, n)
        y = centres[pick, 1] + rng.normal(0, 0.03, n)
    else:
        # coarse lattice: many tied coordinates
        x = rng.integers(0, 6, n) / 5
        y = rng.integers(0, 6, n) / 5
    return np.clip(x, 0, 1), np.clip(y, 0, 1)


def _neighbor(strategy: str, data: Dataset, params: EstimatorParams,
              rng: np.random.Generator) -> tuple[int, float, float]:
    n = data.n
    i = int(rng.integers(0, n))
    x, y = float(data.x[i]), float(data.y[i])
    if strategy == "identity":
        return i, x, y
    if strategy == "random":
        return i, float(rng.random()), float(rng.random())
    if strategy == "corner":
        return i, float(rng.integers(0, 2)), float(rng.integers(0, 2))
    if strategy == "duplicate":
        j = int(rng.integers(0, n))
        return i, float(data.x[j]), float(data.y[j])
    if strategy == "cross-boundary":
        # Move one coordinate just across a boundary of some master range grid.
        ell = int(rng.integers(2, max(3, params.B // 2 + 1)))
        size = params.master_size(ell) if rng.random() < 0.5 else ell
        b = range_equipartition(0.0, 1.0, size).boundaries
        target = float(b[rng.integers(1, size)])
        eps = 1e-9 * (1 if rng.random() < 0.5 else -1)
        value = min(max(target + eps, 0.0), 1.0)
        return (i, value, y) if rng.random() < 0.5 else (i, x, value)
    if strategy == "rank-step":
        # Move one coordinate past a few neighbours in rank order.
        axis = data.x if rng.random() < 0.5 else data.y
        order = np.sort(axis)
        j = int(np.clip(np.searchsorted(order, axis[i]) + rng.integers(-3, 4), 0, n - 1))
        value = min(max(float(order[j]) + 1e-9 * rng.choice([-1, 1]), 0.0), 1.0)
        return (i, value, y) if axis is data.x else (i, x, value)
    raise ValueError(f"unknown strategy {strategy!r}")


def fuzz_sensitivity(statistic: str, n: int, trials: int, rng: np.random.Generator,
                     B: Optional[int] = None, c: float = 2.0,
                     master_sizing=MasterSizing.FULL,
                     pairs_per_dataset: int = 10) -> FuzzReport:
    """Largest |f(D) - f(D')| over random neighboring pairs, versus the bound.

    Datasets live in the unit square; MICr uses the unit square as its range.
    """
    statistic = statistic.lower()
    if statistic not in ("mice", "micr"):
        raise ValueError("statistic must be 'mice' or 'micr'")
    if B is None:
        B = max(4, b_of(n, 0.6))
    params = EstimatorParams(B, c, master_sizing)
    if statistic == "mice":
        bound = mice_sensitivity(n, B)

        def stat(d):
            return mice(d, params)[0]
    else:
        bound = micr_sensitivity(n)

        def stat(d):
            return micr(d, UNIT, params)[0]

    report = FuzzReport(statistic, n, trials, B, c, 0.0, bound)
    base = base_value = None
    for t in range(trials):
        if t % pairs_per_dataset == 0:
            base = Dataset(*_random_dataset(n, rng), UNIT)
            base_value = stat(base)
        strategy = STRATEGIES[t % len(STRATEGIES)]
        i, nx, ny = _neighbor(strategy, base, params, rng)
        delta = abs(stat(base.replace_point(i, nx, ny)) - base_value)
        report.per_strategy[strategy] = max(report.per_strategy.get(strategy, 0.0), delta)
        if delta > report.max_delta:
            report.max_delta = delta
            report.worst = {"trial": t, "strategy": strategy, "index": i,
                            "old": (float(base.x[i]), float(base.y[i])), "new": (nx, ny)}
    return report
