"""Benchmark relationships, noisy mixture distributions and a MIC* oracle."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Optional, Sequence

import numpy as np
from scipy.special import ndtr

from dpmic.grid import CountMatrix, Dataset, RangeBounds, mass_equipartition, stable_ranks
from dpmic.info import optimize_axis

R_SQUARED_LEVELS = tuple(round(0.1 * i, 1) for i in range(1, 10))
N_CENTERS = 100
CALIBRATION_SIZE = 10 ** 6
CALIBRATION_SEED = 20220101
# On independent data the 360 x 260 plug-in estimate reads about 0.009 at
# 10^6 points. That floor shrinks like 1/n; 4e6 points keep it near 0.002.
MIC_STAR_SAMPLE_SIZE = 4 * 10 ** 6
# Mass allowed outside the bounds per axis; at most twice that outside jointly.
OUTSIDE_MASS_PER_AXIS = 2.5e-4


def _piecewise(x, cond1, f1, cond2, f2, f3):
    return np.where(cond1(x), f1(x), np.where(cond2(x), f2(x), f3(x)))


_FUNCTIONS: dict[int, Callable[[np.ndarray], np.ndarray]] = {
    1: lambda x: 0.2 * np.sin(12 * x - 6) + 1.1 * (x - 1) + 1,
    2: lambda x: 0.15 * np.sin(11 * x * np.pi) + (x + 0.05),
    3: lambda x: 0.1 * np.sin(48 * x) + 2 * (x - 0.05),
    4: lambda x: 0.2 * np.sin(48 * x) + 2 * (x - 0.05),
    5: lambda x: 0.4 * np.cos(7 * x * np.pi) + 0.5,
    6: lambda x: 0.4 * np.cos(14 * x * np.pi) + 0.5,
    7: lambda x: 10 * (x - 0.6) ** 3 + 2 * x ** 2 + (1.5 - 3 * x),
    8: lambda x: 4 * (10 * (x - 0.6) ** 3 + 2 * x ** 2 + (1.5 - 3 * x)) - 1.4,
    9: lambda x: np.where(x <= 0.99, x / 99, 99 * x - 98),
    10: lambda x: 2.0 ** x - 1,
    11: lambda x: 8.0 ** (x - 0.3) - 1,
    12: lambda x: x * 1.0,
    13: lambda x: 4 * (x - 0.5) ** 2 + 0.1,
    14: lambda x: 0.4 * np.sin(9 * x * np.pi) + 0.5,
    15: lambda x: 0.4 * np.sin(8 * x * np.pi) + 0.5,
    16: lambda x: 0.4 * np.sin(16 * x * np.pi) + 0.5,
    17: lambda x: _piecewise(x, lambda t: t < 0.491, lambda t: 0.05 + 0 * t,
                             lambda t: t > 0.509, lambda t: 0.95 + 0 * t,
                             lambda t: 50 * (t - 0.5) + 0.5),
    18: lambda x: 0.4 * np.cos(5 * x * np.pi * (1 + x)) + 0.5,
    19: lambda x: 0.4 * np.sin(6 * x * np.pi * (1 + x)) + 0.5,
    20: lambda x: _piecewise(x, lambda t: t <= 0.0528, lambda t: 18 * t,
                             lambda t: t >= 0.1, lambda t: -t / 9 + 1 / 9,
                             lambda t: -18 * t + 1.9),
    21: lambda x: _piecewise(x, lambda t: t <= 0.0051, lambda t: 190 * t,
                             lambda t: t >= 0.01, lambda t: -t / 99 + 1 / 99,
                             lambda t: -198 * t + 1.99),
}

FUNCTION_IDS = tuple(sorted(_FUNCTIONS))


def _function_id(fid) -> int:
    if isinstance(fid, str):
        fid = int(fid.upper().lstrip("F"))
    if fid not in _FUNCTIONS:
        raise ValueError(f"unknown benchmark function {fid!r}; expected F1..F21")
    return int(fid)


def bench_eval(fid, x):
    """Evaluate benchmark function ``fid`` (1..21 or "F1".."F21") on [0, 1]."""
    f = _FUNCTIONS[_function_id(fid)]
    arr = np.asarray(x, dtype=float)
    if np.any(arr < 0) or np.any(arr > 1):
        raise ValueError("benchmark functions are defined on [0, 1]")
    out = f(arr)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True, eq=False)
class NoisyDistribution:
    """Equal-weight mixture of 100 isotropic Gaussians centred on a graph."""

    function_id: int
    r_squared: float
    sigma: float
    centers_x: np.ndarray
    centers_y: np.ndarray
    bounds: RangeBounds

    @property
    def name(self) -> str:
        return f"F{self.function_id}_R{self.r_squared:.1f}"


def _centers(fid: int) -> tuple[np.ndarray, np.ndarray]:
    cx = np.linspace(0.0, 1.0, N_CENTERS)
    return cx, np.asarray(bench_eval(fid, cx), dtype=float)


def _outside_mass(centers: np.ndarray, lo: float, hi: float, sigma: float) -> float:
    return float(np.mean(ndtr((lo - centers) / sigma) + ndtr((centers - hi) / sigma)))


def _padded_axis(centers: np.ndarray, sigma: float) -> tuple[float, float]:
    """Tightest symmetric padding of the centre range keeping the stated mass."""
    lo, hi = float(centers.min()), float(centers.max())
    if sigma == 0:
        return lo, hi
    a, b = 0.0, 10.0 * sigma
    if _outside_mass(centers, lo, hi, sigma) <= OUTSIDE_MASS_PER_AXIS:
        return lo, hi
    for _ in range(100):
        mid = 0.5 * (a + b)
        if _outside_mass(centers, lo - mid, hi + mid, sigma) > OUTSIDE_MASS_PER_AXIS:
            a = mid
        else:
            b = mid
    return lo - b, hi + b


def distribution_bounds(cx, cy, sigma: float) -> RangeBounds:
    x_lo, x_hi = _padded_axis(cx, sigma)
    y_lo, y_hi = _padded_axis(cy, sigma)
    return RangeBounds(x_lo, x_hi, y_lo, y_hi)


def empirical_r_squared(y, y_fit) -> float:
    """1 - SS_res / SS_tot of ``y`` against fitted values ``y_fit``."""
    y = np.asarray(y, dtype=float)
    resid = y - np.asarray(y_fit, dtype=float)
    ss_tot = float(((y - y.mean()) ** 2).sum())
    return 1.0 - float((resid ** 2).sum()) / ss_tot


def calibrate_sigma(fid, r_squared: float, size: int = CALIBRATION_SIZE,
                    seed: int = CALIBRATION_SEED, tol: float = 1e-9) -> float:
    """Noise level whose calibration sample has R^2 of y against f equal to target.

    R^2 is measured for y against the noiseless value f(x_c) of the
    generating centre. Bisection runs on a single fixed draw of centres and
    standard normals, so the calibration is deterministic.
    """
    fid = _function_id(fid)
    if not 0 < r_squared <= 1:
        raise ValueError(f"R^2 must lie in (0, 1], got {r_squared}")
    if r_squared == 1:
        return 0.0
    _, cy = _centers(fid)
    rng = np.random.default_rng([seed, fid])
    fit = cy[rng.integers(0, N_CENTERS, size)]
    z = rng.standard_normal(size)

    def r2(sigma):
        return empirical_r_squared(fit + sigma * z, fit)

    lo, hi = 0.0, float(np.std(cy)) or 1.0
    while r2(hi) > r_squared:
        hi *= 2
        if hi > 1e6:
            raise ValueError(f"cannot reach R^2={r_squared} for F{fid}")
    while hi - lo > tol * hi:
        mid = 0.5 * (lo + hi)
        if r2(mid) > r_squared:
            lo = mid
        else:
            hi = mid
    sigma = 0.5 * (lo + hi)
    if abs(r2(sigma) - r_squared) > 1e-3:
        raise ValueError(
            f"R^2 calibration for F{fid} is not monotone near {r_squared}: "
            f"reached {r2(sigma):.4f}")
    return sigma


def make_distribution(fid, r_squared: float, sigma: Optional[float] = None) -> NoisyDistribution:
    """Mixture for ``fid`` at noise level ``r_squared`` (1.0 means noiseless).

    Pass ``sigma`` to skip calibration, e.g. when loading a cached registry.
    """
    fid = _function_id(fid)
    if not 0 < r_squared <= 1:
        raise ValueError(f"R^2 must lie in (0, 1], got {r_squared}")
    if sigma is None:
        sigma = calibrate_sigma(fid, r_squared)
    if sigma < 0 or (sigma == 0) != (r_squared == 1):
        raise ValueError("sigma must be 0 exactly when R^2 = 1")
    cx, cy = _centers(fid)
    for arr in (cx, cy):
        arr.setflags(write=False)
    return NoisyDistribution(fid, float(r_squared), float(sigma), cx, cy,
                             distribution_bounds(cx, cy, sigma))


def raw_sample(dist: NoisyDistribution, n: int, rng: np.random.Generator):
    """Unclamped mixture draws ``(x, y)``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    idx = rng.integers(0, N_CENTERS, n)
    x = dist.centers_x[idx] + dist.sigma * rng.standard_normal(n)
    y = dist.centers_y[idx] + dist.sigma * rng.standard_normal(n)
    return x, y


def sample(dist: NoisyDistribution, n: int, rng: np.random.Generator) -> Dataset:
    """n i.i.d. points from ``dist``, clamped to its bounds."""
    x, y = raw_sample(dist, n, rng)
    b = dist.bounds
    return Dataset(np.clip(x, b.x_lo, b.x_hi), np.clip(y, b.y_lo, b.y_hi), b)


def independent_uniform_sample(n: int, rng: np.random.Generator) -> Dataset:
    return Dataset(rng.random(n), rng.random(n), RangeBounds(0, 1, 0, 1))


@dataclass(frozen=True)
class MicStarEstimate:
    value: float
    column_size: int
    master_size: int
    sample_size: int


def _max_normalized(col_ranks, row_ranks, columns: int, master: int) -> float:
    n = col_ranks.size
    cols = mass_equipartition(np.empty(n), columns).locate(col_ranks)
    rows = mass_equipartition(np.empty(n), master).locate(row_ranks)
    flat = np.bincount(rows * columns + cols, minlength=master * columns)
    opt = optimize_axis(CountMatrix(flat.reshape(master, columns)), master)
    return max(v / math.log2(min(k, columns)) for k, v in opt.per_k.items())


def mic_star_from_points(x, y, columns: int = 360, master: int = 260) -> float:
    """Large-sample surrogate of MIC*: dense mass-equipartition masters, both axes."""
    rx = stable_ranks(np.asarray(x, dtype=float))
    ry = stable_ranks(np.asarray(y, dtype=float))
    value = max(_max_normalized(rx, ry, columns, master),
                _max_normalized(ry, rx, columns, master))
    return min(max(value, 0.0), 1.0)


def mic_star(dist: NoisyDistribution, sample_size: int = MIC_STAR_SAMPLE_SIZE,
             columns: int = 360, master: int = 260, seed: int = 7) -> MicStarEstimate:
    rng = np.random.default_rng([seed, dist.function_id, int(round(dist.r_squared * 1000))])
    x, y = raw_sample(dist, sample_size, rng)
    return MicStarEstimate(mic_star_from_points(x, y, columns, master), columns, master,
                           sample_size)


def wsum_weights(mic_stars: Sequence[float]) -> np.ndarray:
    """Interval lengths between midpoints of adjacent sorted MIC* values.

    The first interval starts at 0 and the last ends at 1, so the weights
    sum to 1.
    """
    v = np.asarray(mic_stars, dtype=float)
    if v.ndim != 1 or v.size == 0:
        raise ValueError("need a nonempty sequence of MIC* values")
    if np.any(np.diff(v) < 0):
        raise ValueError("MIC* values must be sorted in increasing order")
    if v[0] < 0 or v[-1] > 1:
        raise ValueError("MIC* values must lie in [0, 1]")
    edges = np.concatenate(([0.0], (v[:-1] + v[1:]) / 2, [1.0]))
    return np.diff(edges)


def wsum_objective(mic_stars: Sequence[float], avg_unsigned_errors: Sequence[float]) -> float:
    """Weighted sum of per-distribution average unsigned errors."""
    w = wsum_weights(mic_stars)
    e = np.asarray(avg_unsigned_errors, dtype=float)
    if e.shape != w.shape:
        raise ValueError("one error per distribution is required")
    return float(np.dot(w, e))


def all_distributions(levels: Iterable[float] = R_SQUARED_LEVELS,
                      functions: Iterable[int] = FUNCTION_IDS,
                      registry: Optional[dict] = None) -> list[NoisyDistribution]:
    """Distributions for every (function, R^2) pair, in (function, R^2) order."""
    out = []
    for fid in functions:
        for r2 in levels:
            sigma = None if registry is None else registry.get((fid, round(r2, 3)))
            out.append(make_distribution(fid, r2, sigma))
    return out


def save_registry(dists: Iterable[NoisyDistribution], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["id", "r_squared", "sigma"])
        for d in dists:
            w.writerow([f"F{d.function_id}", f"{d.r_squared:.3f}", repr(d.sigma)])


def load_registry(path) -> dict[tuple[int, float], float]:
    """Map (function id, R^2) -> calibrated sigma."""
    out = {}
    with open(Path(path), newline="") as fh:
        for row in csv.DictReader(fh):
            out[(_function_id(row["id"]), round(float(row["r_squared"]), 3))] = float(row["sigma"])
    return out
