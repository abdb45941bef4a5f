"""Sensitivity bounds, noise samplers and the private MIC mechanisms.

The Laplace sampler works on IEEE doubles and therefore inherits the known
floating-point side channels of textbook Laplace noise. This is a research
tool; do not use it as a hardened DP system.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np

from dpmic.estimators import EstimatorParams, Family, characteristic_matrix, mice, micr
from dpmic.grid import CountMatrix, Dataset, RangeBounds

logger = logging.getLogger(__name__)


class DegenerateNoiseWarning(RuntimeWarning):
    """A noisy master count matrix came out all zero."""


@dataclass(frozen=True)
class PrivacyParams:
    epsilon: float
    rng_seed: int = 0

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if int(self.rng_seed) != self.rng_seed or self.rng_seed < 0:
            raise ValueError("rng_seed must be a nonnegative integer")

    def rng(self, *key: int) -> np.random.Generator:
        """Generator for the sub-stream identified by ``key``."""
        return np.random.default_rng([int(self.rng_seed), *key])


def mice_sensitivity(n: int, B: int) -> float:
    """Upper bound on the change of MICe between neighboring datasets."""
    if n < 6:
        raise ValueError(f"the MICe sensitivity bound needs n >= 6, got {n}")
    return B * ((2 * math.log2(n)) / n + 4.8 / n)


def micr_sensitivity(n: int) -> float:
    """Upper bound on the change of MICr between neighboring datasets."""
    if n < 4:
        raise ValueError(f"the MICr sensitivity bound needs n >= 4, got {n}")
    return (4 * math.log2(n)) / n + 6 / n


def laplace_samples(scale: float, size, rng: np.random.Generator) -> np.ndarray:
    """Zero-mean Laplace draws by inverting the CDF of uniform draws."""
    if not scale > 0:
        raise ValueError(f"Laplace scale must be positive, got {scale}")
    u = rng.random(size)
    # rng.random() is in [0, 1); u == 0 would give -inf.
    while np.any(u == 0.0):
        zero = u == 0.0
        u[zero] = rng.random(int(zero.sum()))
    return np.where(u < 0.5, scale * np.log(2 * u), -scale * np.log(2 * (1 - u)))


def laplace_sample(scale: float, rng: np.random.Generator) -> float:
    if not scale > 0:
        raise ValueError(f"Laplace scale must be positive, got {scale}")
    u = rng.random()
    while u == 0.0:
        u = rng.random()
    if u < 0.5:
        return scale * math.log(2 * u)
    return -scale * math.log(2 * (1 - u))


def clip01(x: float) -> float:
    return min(max(x, 0.0), 1.0)


def laplace_release(value: float, sensitivity: float, epsilon: float,
                    rng: np.random.Generator) -> float:
    """``[value + Lap(sensitivity / epsilon)]`` truncated to [0, 1]."""
    return clip01(value + laplace_sample(sensitivity / epsilon, rng))


@dataclass(frozen=True, eq=False)
class TruncGeomDist:
    """Two-sided geometric noise around f, truncated to {0, ..., n}.

    ``pmf[i]`` is the probability of output i. Sampling clamps f + Z to
    [0, n], where Z is untruncated two-sided geometric noise; this has the
    same distribution and lets one table serve every centre f.
    """

    epsilon: float
    n: int
    f: int
    pmf: np.ndarray

    def sample(self, rng: np.random.Generator, size=None):
        return truncgeom_sample(self.epsilon, self.n, self.f, rng, size)


def truncgeom_pmf(epsilon: float, n: int, f: int) -> np.ndarray:
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    if n < 1:
        raise ValueError("n must be >= 1")
    if not 0 <= f <= n:
        raise ValueError(f"centre f={f} outside [0, {n}]")
    rho = math.exp(-epsilon)
    i = np.arange(n + 1)
    pmf = (1 - rho) / (1 + rho) * rho ** np.abs(f - i).astype(float)
    pmf[0] = rho ** f / (1 + rho)
    pmf[n] = rho ** (n - f) / (1 + rho)
    return pmf


def truncgeom_build(epsilon: float, n: int, f: int) -> TruncGeomDist:
    pmf = truncgeom_pmf(epsilon, n, f)
    pmf.setflags(write=False)
    return TruncGeomDist(epsilon, n, f, pmf)


@lru_cache(maxsize=64)
def _offset_cdf(epsilon: float, n: int) -> np.ndarray:
    """CDF of two-sided geometric noise on offsets -n..n, tails folded in.

    Any offset beyond +-n clamps to the same output as +-n, so folding the
    tails keeps the clamped distribution exact.
    """
    rho = math.exp(-epsilon)
    z = np.arange(-n, n + 1)
    p = (1 - rho) / (1 + rho) * rho ** np.abs(z).astype(float)
    tail = rho ** n / (1 + rho)  # P(Z <= -n) = P(Z >= n)
    p[0] = tail
    p[-1] = tail
    cdf = np.cumsum(p)
    cdf /= cdf[-1]
    cdf.setflags(write=False)
    return cdf


def truncgeom_sample(epsilon: float, n: int, f, rng: np.random.Generator, size=None):
    """Draw TruncGeom(epsilon, n, f); ``f`` may be an integer array."""
    f = np.asarray(f, dtype=np.int64)
    if np.any(f < 0) or np.any(f > n):
        raise ValueError(f"centre outside [0, {n}]")
    shape = f.shape if size is None else size
    cdf = _offset_cdf(float(epsilon), int(n))
    u = rng.random(shape)
    offset = np.searchsorted(cdf, u, side="right") - n
    out = np.clip(f + offset, 0, n)
    return int(out) if np.ndim(out) == 0 else out


def noisy_counts(counts: CountMatrix, epsilon: float, n: int,
                 rng: np.random.Generator) -> CountMatrix:
    """Replace every cell by an independent TruncGeom(epsilon, n, cell) draw."""
    return CountMatrix(truncgeom_sample(epsilon, n, counts.counts, rng))


def mice_lap(dataset: Dataset, params: EstimatorParams, priv: PrivacyParams,
             rng: Optional[np.random.Generator] = None) -> float:
    """MICe plus Laplace noise scaled to the MICe sensitivity bound."""
    delta = mice_sensitivity(dataset.n, params.B)
    value, _ = mice(dataset, params)
    return laplace_release(value, delta, priv.epsilon, rng or priv.rng(0))


def micr_lap(dataset: Dataset, bounds: Optional[RangeBounds], params: EstimatorParams,
             priv: PrivacyParams, rng: Optional[np.random.Generator] = None) -> float:
    """MICr plus Laplace noise scaled to the MICr sensitivity bound."""
    delta = micr_sensitivity(dataset.n)
    value, _ = micr(dataset, bounds, params)
    return laplace_release(value, delta, priv.epsilon, rng or priv.rng(0))


_SIDE_KEY = {"rows": 0, "cols": 1}


def micr_geom(dataset: Dataset, bounds: Optional[RangeBounds], params: EstimatorParams,
              priv: PrivacyParams) -> float:
    """MICr computed on noisy master count matrices.

    Each master grid (one per column count l, and one per row count k on the
    mirrored side) gets a single noisy copy whose cells are independent
    TruncGeom(epsilon/2, n, count) draws; that copy serves every entry that
    shares the master. Noise for a master is drawn from its own sub-stream
    keyed by (side, size), so results do not depend on evaluation order.
    """
    return micr_geom_matrix(dataset, bounds, params, priv).value


def micr_geom_matrix(dataset: Dataset, bounds: Optional[RangeBounds],
                     params: EstimatorParams, priv: PrivacyParams):
    if dataset.n < 4:
        raise ValueError(f"need at least 4 points, got {dataset.n}")
    n = dataset.n
    half_eps = priv.epsilon / 2

    def hook(counts: CountMatrix, side: str, size: int) -> CountMatrix:
        return noisy_counts(counts, half_eps, n, priv.rng(_SIDE_KEY[side], size))

    cm = characteristic_matrix(dataset, params, Family.RANGE, bounds, hook=hook)
    if cm.degenerate:
        msg = f"all-zero noisy master matrices for {cm.degenerate}; entries set to 0"
        logger.warning(msg)
        warnings.warn(msg, DegenerateNoiseWarning, stacklevel=3)
    return cm
