"""Tuned (c, B) settings for the MICr mechanisms and their interpolation."""

from __future__ import annotations

import math

from dpmic.estimators import b_of

TABLE3_N = (25, 250, 500, 1000, 5000, 10000)

# mechanism -> epsilon -> (c, B) per row of TABLE3_N
TABLE3 = {
    "micr-geom": {
        1.0: ((2, 12), (1, 40), (1, 40), (1, 60), (1, 150), (1, 150)),
        0.1: ((2, 6), (2, 10), (2, 20), (2, 40), (1, 40), (1, 80)),
    },
    "micr-lap": {
        1.0: ((5, 8), (5, 40), (5, 60), (5, 80), (5, 150), (5, 150)),
        0.1: ((5, 6), (5, 40), (5, 80), (5, 100), (5, 125), (5, 150)),
    },
}

MICE_ALPHA = 0.6
MICE_C = 15


def nearest_epsilon(epsilon: float) -> float:
    """Tabulated epsilon closest to ``epsilon`` on a log scale."""
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    return min((0.1, 1.0), key=lambda e: abs(math.log(epsilon / e)))


def table3_params(mechanism: str, epsilon: float, n: int) -> tuple[int, int]:
    """(c, B) for ``mechanism`` at sample size n.

    B is interpolated linearly between the bracketing tabulated n and
    rounded to the nearest integer; c comes from the lower bracket. n above
    the last row uses the last row.
    """
    mechanism = mechanism.lower()
    if mechanism not in TABLE3:
        raise ValueError(f"no tuned parameters for {mechanism!r}")
    if n < TABLE3_N[0]:
        raise ValueError(f"n={n} is below the tuned range (n >= {TABLE3_N[0]})")
    rows = TABLE3[mechanism][nearest_epsilon(epsilon)]
    if n >= TABLE3_N[-1]:
        return rows[-1]
    i = max(j for j, v in enumerate(TABLE3_N) if v <= n)
    (c0, b0), (_, b1) = rows[i], rows[i + 1]
    n0, n1 = TABLE3_N[i], TABLE3_N[i + 1]
    b = b0 + (b1 - b0) * (n - n0) / (n1 - n0)
    return c0, int(math.floor(b + 0.5))


def default_params(mechanism: str, epsilon: float, n: int) -> tuple[float, int]:
    """(c, B) used when none are given: tuned for MICr, n^0.6 and 15 for MICe."""
    mechanism = mechanism.lower()
    if mechanism in ("mice", "mice-lap"):
        return MICE_C, max(4, b_of(n, MICE_ALPHA))
    if mechanism == "micr":
        mechanism = "micr-lap"
    return table3_params(mechanism, epsilon, n)
