"""Bias/variance sweeps over synthetic distributions or fixed datasets."""

from __future__ import annotations

import csv
import logging
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from dpmic.estimators import EstimatorParams, MasterSizing, b_of, mice, micr
from dpmic.grid import Dataset, RangeBounds
from dpmic.harness.params import MICE_ALPHA, MICE_C, default_params
from dpmic.mechanisms import (
    PrivacyParams,
    laplace_release,
    mice_lap,
    mice_sensitivity,
    micr_geom,
    micr_lap,
    micr_sensitivity,
)
from dpmic.synthetic import NoisyDistribution, mic_star, sample, wsum_objective

logger = logging.getLogger(__name__)

MECHANISMS = ("mice", "micr", "mice-lap", "micr-lap", "micr-geom")
PRIVATE_MECHANISMS = ("mice-lap", "micr-lap", "micr-geom")

RESULT_HEADER = ("dataset_id", "mechanism", "epsilon", "n", "B", "c", "iterations",
                 "reference", "bias", "variance", "avg_unsigned_error", "mse", "error")
RAW_HEADER = ("dataset_id", "mechanism", "epsilon", "n", "iteration", "output")


def run_mechanism(name: str, dataset: Dataset, bounds: Optional[RangeBounds],
                  params: EstimatorParams, priv: Optional[PrivacyParams] = None) -> float:
    """Evaluate one statistic or mechanism by its CLI name."""
    name = name.lower()
    if name == "mice":
        return mice(dataset, params)[0]
    if name == "micr":
        return micr(dataset, bounds, params)[0]
    if priv is None:
        raise ValueError(f"{name} needs privacy parameters")
    if name == "mice-lap":
        return mice_lap(dataset, params, priv)
    if name == "micr-lap":
        return micr_lap(dataset, bounds, params, priv)
    if name == "micr-geom":
        return micr_geom(dataset, bounds, params, priv)
    raise ValueError(f"unknown mechanism {name!r}; expected one of {MECHANISMS}")


@dataclass
class ExperimentConfig:
    mechanism: str
    epsilon: float = 1.0
    iterations: int = 50
    n_values: Sequence[int] = (5000,)
    B: Optional[int] = None
    c: Optional[float] = None
    seed: int = 0
    master_sizing: MasterSizing = MasterSizing.CLUMPED
    workers: int = 1

    def __post_init__(self):
        self.mechanism = self.mechanism.lower()
        if self.mechanism not in MECHANISMS:
            raise ValueError(f"unknown mechanism {self.mechanism!r}")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if (self.B is None) != (self.c is None):
            raise ValueError("give both B and c, or neither to use tuned defaults")
        self.master_sizing = MasterSizing(self.master_sizing)

    def params_for(self, n: int) -> EstimatorParams:
        if self.B is not None:
            return EstimatorParams(int(self.B), float(self.c), self.master_sizing)
        c, B = default_params(self.mechanism, self.epsilon, n)
        return EstimatorParams(int(B), float(c), self.master_sizing)


@dataclass
class SyntheticTarget:
    """A distribution sampled afresh on every iteration; reference is MIC*."""

    dist: NoisyDistribution
    reference: float

    @property
    def target_id(self) -> str:
        return self.dist.name


@dataclass
class DatasetTarget:
    """A fixed dataset; reference defaults to MICe with B = n^0.6, c = 15."""

    target_id: str
    dataset: Dataset
    reference: Optional[float] = None


Target = Union[SyntheticTarget, DatasetTarget]


@dataclass
class ResultRow:
    dataset_id: str
    mechanism: str
    epsilon: float
    n: int
    B: int
    c: float
    reference: float
    outputs: tuple[float, ...] = ()
    error: Optional[str] = None

    @property
    def iterations(self) -> int:
        return len(self.outputs)

    def _errors(self) -> np.ndarray:
        return np.asarray(self.outputs, dtype=float) - self.reference

    @property
    def bias(self) -> float:
        return float(self._errors().mean()) if self.outputs else float("nan")

    @property
    def variance(self) -> float:
        return float(np.var(self.outputs)) if self.outputs else float("nan")

    @property
    def avg_unsigned_error(self) -> float:
        return float(np.abs(self._errors()).mean()) if self.outputs else float("nan")

    @property
    def mse(self) -> float:
        return float((self._errors() ** 2).mean()) if self.outputs else float("nan")


def derived_seed(*key) -> int:
    """64-bit seed derived from integers and strings."""
    ints = [zlib.crc32(k.encode()) if isinstance(k, str) else int(k) for k in key]
    words = np.random.SeedSequence(ints).generate_state(2, np.uint32)
    return (int(words[0]) << 32) | int(words[1])


def reference_mice(dataset: Dataset, master_sizing=MasterSizing.CLUMPED) -> float:
    params = EstimatorParams(max(4, b_of(dataset.n, MICE_ALPHA)), MICE_C, master_sizing)
    return mice(dataset, params)[0]


def _run_target(config: ExperimentConfig, target: Target, n: Optional[int]) -> ResultRow:
    tid = target.target_id
    if isinstance(target, DatasetTarget):
        n = target.dataset.n
    params = config.params_for(n)
    row = ResultRow(tid, config.mechanism, config.epsilon, n, params.B, params.c,
                    float("nan"))
    try:
        if isinstance(target, DatasetTarget):
            ref = target.reference
            if ref is None:
                ref = reference_mice(target.dataset, config.master_sizing)
            row.reference = ref
            row.outputs = _fixed_dataset_outputs(config, target, params)
        else:
            row.reference = target.reference
            outputs = []
            for i in range(config.iterations):
                data = sample(target.dist, n, np.random.default_rng(derived_seed(
                    config.seed, tid, n, i, 0)))
                priv = PrivacyParams(config.epsilon, derived_seed(config.seed, tid, n, i, 1))
                outputs.append(run_mechanism(config.mechanism, data, data.bounds, params, priv))
            row.outputs = tuple(outputs)
    except Exception as exc:  # keep going; the failure is reported in the row
        logger.exception("target %s failed", tid)
        row.error = f"{type(exc).__name__}: {exc}"
    return row


def _fixed_dataset_outputs(config: ExperimentConfig, target: DatasetTarget,
                           params: EstimatorParams) -> tuple[float, ...]:
    data = target.dataset
    mech = config.mechanism
    privs = [PrivacyParams(config.epsilon, derived_seed(config.seed, target.target_id,
                                                        data.n, i, 1))
             for i in range(config.iterations)]
    if mech in ("mice", "micr"):
        value = run_mechanism(mech, data, data.bounds, params)
        return (value,) * config.iterations
    if mech in ("mice-lap", "micr-lap"):
        # Same draws as calling the mechanism each time; the statistic is computed once.
        if mech == "mice-lap":
            base, delta = mice(data, params)[0], mice_sensitivity(data.n, params.B)
        else:
            base, delta = micr(data, data.bounds, params)[0], micr_sensitivity(data.n)
        return tuple(laplace_release(base, delta, p.epsilon, p.rng(0)) for p in privs)
    return tuple(run_mechanism(mech, data, data.bounds, params, p) for p in privs)


def _job(args):
    return _run_target(*args)


def run_bias_variance(config: ExperimentConfig, targets: Iterable[Target]) -> list[ResultRow]:
    """One row per (target, n), in target order then n order."""
    jobs = []
    for target in targets:
        if isinstance(target, DatasetTarget):
            jobs.append((config, target, None))
        else:
            jobs.extend((config, target, n) for n in config.n_values)
    if config.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            return list(pool.map(_job, jobs))
    return [_job(j) for j in jobs]


def synthetic_targets(dists: Iterable[NoisyDistribution],
                      references: Optional[dict[str, float]] = None) -> list[SyntheticTarget]:
    """Attach MIC* references, computing any that are not supplied."""
    out = []
    for d in dists:
        ref = None if references is None else references.get(d.name)
        if ref is None:
            ref = mic_star(d).value
        out.append(SyntheticTarget(d, ref))
    return out


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_results(rows: Sequence[ResultRow], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RESULT_HEADER)
        for r in rows:
            w.writerow([_fmt(v) for v in (
                r.dataset_id, r.mechanism, float(r.epsilon), r.n, r.B, float(r.c),
                r.iterations, float(r.reference), r.bias, r.variance,
                r.avg_unsigned_error, r.mse, r.error)])


def write_raw(rows: Sequence[ResultRow], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RAW_HEADER)
        for r in rows:
            for i, out in enumerate(r.outputs):
                w.writerow([_fmt(v) for v in (r.dataset_id, r.mechanism, float(r.epsilon),
                                              r.n, i, float(out))])


@dataclass
class BinSummary:
    lo: float
    hi: float
    count: int
    median_bias: Optional[float] = None
    median_variance: Optional[float] = None
    bias_iqr: Optional[float] = None
    dataset_ids: list[str] = field(default_factory=list, repr=False)


SPELLMAN_ENDPOINTS = (0.0, 0.1, 0.2, 0.3, 0.4, 1.0)
BASEBALL_ENDPOINTS = (0.0, 0.2, 0.4, 0.6, 0.8, 1.0)


def bin_index(score: float, endpoints: Sequence[float]) -> int:
    """Half-open bins ``[e_i, e_{i+1})`` with the last bin closed."""
    assert 0.0 <= score <= 1.0, f"score {score} outside [0, 1]"
    e = np.asarray(endpoints, dtype=float)
    if score == e[-1]:
        return e.size - 2
    return int(np.searchsorted(e, score, side="right") - 1)


def _check_endpoints(endpoints: Sequence[float]) -> None:
    e = np.asarray(endpoints, dtype=float)
    if e.size < 2 or e[0] != 0.0 or e[-1] != 1.0 or np.any(np.diff(e) <= 0):
        raise ValueError("bin endpoints must increase strictly from 0 to 1")


def bin_by_mice(rows: Sequence[ResultRow], endpoints: Sequence[float]) -> list[BinSummary]:
    """Group rows by their reference (non-private MICe) score."""
    _check_endpoints(endpoints)
    groups: list[list[ResultRow]] = [[] for _ in range(len(endpoints) - 1)]
    for r in rows:
        if r.error is None:
            groups[bin_index(r.reference, endpoints)].append(r)
    out = []
    for i, g in enumerate(groups):
        s = BinSummary(float(endpoints[i]), float(endpoints[i + 1]), len(g),
                       dataset_ids=[r.dataset_id for r in g])
        if g:
            biases = np.array([r.bias for r in g])
            s.median_bias = float(np.median(biases))
            s.median_variance = float(np.median([r.variance for r in g]))
            q75, q25 = np.percentile(biases, [75, 25])
            s.bias_iqr = float(q75 - q25)
        out.append(s)
    return out


def format_bins(bins: Sequence[BinSummary]) -> str:
    lines = [f"{'bin':>12} {'count':>6} {'med_bias':>10} {'med_var':>10} {'bias_iqr':>10}"]
    for b in bins:
        def f(v):
            return f"{v:10.4f}" if v is not None else f"{'-':>10}"
        label = f"[{b.lo:.2f},{b.hi:.2f}{']' if b.hi == 1.0 else ')'}"
        lines.append(f"{label:>12} {b.count:>6} {f(b.median_bias)} "
                     f"{f(b.median_variance)} {f(b.bias_iqr)}")
    return "\n".join(lines)


def format_rows(rows: Sequence[ResultRow]) -> str:
    lines = [f"{'dataset':<16} {'mech':<9} {'n':>6} {'B':>4} {'c':>4} {'ref':>7} "
             f"{'bias':>8} {'var':>9} {'aue':>7}"]
    for r in rows:
        if r.error:
            lines.append(f"{r.dataset_id:<16} {r.mechanism:<9} {r.n:>6} ERROR {r.error}")
            continue
        lines.append(f"{r.dataset_id:<16} {r.mechanism:<9} {r.n:>6} {r.B:>4} {r.c:>4g} "
                     f"{r.reference:7.4f} {r.bias:8.4f} {r.variance:9.2e} "
                     f"{r.avg_unsigned_error:7.4f}")
    return "\n".join(lines)


def wsum_for(rows: Sequence[ResultRow]) -> float:
    """WSUM objective over rows whose references are MIC* values."""
    good = sorted((r for r in rows if r.error is None), key=lambda r: (r.reference, r.dataset_id))
    refs = [min(max(r.reference, 0.0), 1.0) for r in good]
    return wsum_objective(refs, [r.avg_unsigned_error for r in good])


def tune(mechanism: str, epsilon: float, n: int, grid: Iterable[tuple[int, float]],
         targets: Sequence[SyntheticTarget], iterations: int = 50, seed: int = 0,
         master_sizing=MasterSizing.CLUMPED, workers: int = 1) -> list[tuple[int, float, float]]:
    """WSUM objective for every (B, c) in ``grid``, in grid order."""
    out = []
    for B, c in grid:
        cfg = ExperimentConfig(mechanism, epsilon, iterations, (n,), B, c, seed,
                               master_sizing, workers)
        rows = run_bias_variance(cfg, targets)
        out.append((int(B), float(c), wsum_for(rows)))
    return out
