"""Discrete mutual information and single-axis grid optimization."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from dpmic.grid import CountMatrix, coarsen_rows

_NORMALIZATION_TOL = 1e-9
# Relative slack used to recognise exact ties when tracing back the DP.
_TIE_RTOL = 1e-13
# MI below this many bits is floating-point residue of an exactly independent table.
_MI_FLOOR = 1e-14


def _check_probabilities(p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.ndim != 2:
        raise ValueError("expected a 2-D probability matrix")
    if np.any(p < 0) or not np.all(np.isfinite(p)):
        raise ValueError("probabilities must be finite and nonnegative")
    total = p.sum()
    if abs(total - 1.0) > _NORMALIZATION_TOL:
        raise ValueError(f"matrix is not normalized (sum = {total!r})")
    return p


def entropy(probs) -> float:
    """Shannon entropy in bits of a probability vector (0 log 0 = 0)."""
    q = np.asarray(probs, dtype=float).ravel()
    q = q[q > 0]
    return float(-(q * np.log2(q)).sum())


def mutual_information(p) -> float:
    """Mutual information in bits of the joint distribution ``p``.

    Cells with zero probability contribute nothing. Values within rounding
    of zero (including small negatives) are reported as exactly 0.
    """
    p = _check_probabilities(p)
    rows = p.sum(axis=1)
    cols = p.sum(axis=0)
    mask = p > 0
    outer = np.outer(rows, cols)
    mi = float((p[mask] * np.log2(p[mask] / outer[mask])).sum())
    return mi if mi > _MI_FLOOR else 0.0


def normalized_mi(p) -> float:
    """Mutual information divided by ``log2(min(k, l))``, clipped to [0, 1]."""
    p = np.asarray(p, dtype=float)
    if p.ndim != 2 or min(p.shape) < 2:
        raise ValueError(f"normalized MI needs k, l >= 2, got shape {p.shape}")
    value = mutual_information(p) / math.log2(min(p.shape))
    return min(max(value, 0.0), 1.0)


@dataclass
class AxisOptimum:
    """Best row subpartitions of a master count matrix, one per size k.

    ``arg_partition[k]`` holds the k-1 internal dividers as row offsets into
    the master (a divider ``d`` separates master rows ``d-1`` and ``d``).
    ``operations`` counts elementary cell evaluations plus DP transitions.
    """

    per_k: dict[int, float]
    arg_partition: dict[int, tuple[int, ...]]
    master_rows: int
    operations: int = field(default=0, compare=False)


def _xlog2x(a: np.ndarray) -> np.ndarray:
    out = np.zeros_like(a, dtype=float)
    pos = a > 0
    out[pos] = a[pos] * np.log2(a[pos])
    return out


def _segment_scores(counts: np.ndarray) -> tuple[np.ndarray, int]:
    """score[s, t] for the block of master rows s..t-1 (s < t), -inf elsewhere.

    For a fixed column partition, I = H(cols) + (1/n) * sum of block scores,
    where a block with column counts c_j and total m scores
    ``sum_j c_j log2 c_j - m log2 m``.
    """
    k_hat, ell = counts.shape
    cum = np.zeros((k_hat + 1, ell))
    np.cumsum(counts, axis=0, out=cum[1:])
    score = np.full((k_hat + 1, k_hat + 1), -np.inf)
    ops = 0
    for s in range(k_hat):
        block = cum[s + 1:] - cum[s]
        score[s, s + 1:] = _xlog2x(block).sum(axis=1) - _xlog2x(block.sum(axis=1))
        ops += block.size
    return score, ops


def optimize_axis(master_counts: CountMatrix, k_max: int) -> AxisOptimum:
    """Maximize I over size-k subpartitions of the master rows, 2 <= k <= k_max.

    The column partition is fixed, so maximizing I amounts to maximizing
    H(rows) - H(rows, cols), which splits into a sum of per-block scores. A
    suffix dynamic program over (first row of the remaining suffix, parts
    left) finds the optimum for every k in O(k̂^2 * (l + k_max)) steps.
    Among equally good partitions the lexicographically smallest divider
    set is returned. Reported values are recomputed directly from the
    coarsened matrix of the chosen partition.
    """
    counts = np.asarray(master_counts.counts, dtype=float)
    k_hat, _ = counts.shape
    if k_max < 2:
        raise ValueError("k_max must be >= 2")
    if k_max > k_hat:
        raise ValueError(f"k_max={k_max} exceeds the {k_hat} master rows")
    n = counts.sum()
    if n <= 0:
        raise ValueError("mutual information is undefined for an all-zero matrix")

    score, ops = _segment_scores(counts)
    # best[x][s]: best total score splitting rows s..k̂-1 into x blocks.
    best = [None, score[:, k_hat].copy()]
    best[1][k_hat] = -np.inf
    for x in range(2, k_max + 1):
        cand = score + best[x - 1][None, :]
        best.append(cand.max(axis=1))
        ops += cand.size

    per_k: dict[int, float] = {}
    arg: dict[int, tuple[int, ...]] = {}
    for k in range(2, k_max + 1):
        dividers = []
        s = 0
        for x in range(k, 1, -1):
            target = best[x][s]
            cand = score[s] + best[x - 1]
            slack = _TIE_RTOL * max(1.0, abs(target))
            t = int(np.flatnonzero(cand >= target - slack)[0])
            dividers.append(t)
            s = t
        arg[k] = tuple(dividers)
        per_k[k] = mutual_information(coarsen_rows(counts, dividers) / n)
    return AxisOptimum(per_k=per_k, arg_partition=arg, master_rows=k_hat,
                       operations=ops)
