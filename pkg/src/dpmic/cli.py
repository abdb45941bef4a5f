"""Command line interface: ``dpmic {mic,synth,experiment,fuzz,tune}``."""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import yaml

from dpmic.estimators import EstimatorParams, MasterSizing, b_of, mice, micr
from dpmic.grid import Dataset, RangeBounds
from dpmic.harness.data import BoundsPolicy, PairingMode, ingest_csv, padded_bounds
from dpmic.harness.experiment import (
    BASEBALL_ENDPOINTS,
    MECHANISMS,
    DatasetTarget,
    ExperimentConfig,
    bin_by_mice,
    format_bins,
    format_rows,
    run_bias_variance,
    synthetic_targets,
    tune,
    write_raw,
    write_results,
)
from dpmic.harness.fuzz import fuzz_sensitivity
from dpmic.harness.params import default_params
from dpmic.mechanisms import PrivacyParams
from dpmic.synthetic import (
    FUNCTION_IDS,
    R_SQUARED_LEVELS,
    make_distribution,
    mic_star,
    sample,
)

log = logging.getLogger("dpmic")

DEFAULTS = {
    "mechanism": "micr",
    "epsilon": 1.0,
    "seed": 0,
    "iterations": 50,
    "n": "5000",
    "sizing": "clumped",
    "pairs": "all",
    "trials": 1000,
    "statistic": "micr",
    "workers": 1,
    "c_grid": "1,2",
    "B_grid": "8,12,20,40,60,80,100,125,150",
}


def _floats(text) -> list[float]:
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    return [float(v) for v in str(text).split(",") if v.strip()]


def _ints(text) -> list[int]:
    return [int(v) for v in _floats(text)]


def _function_list(text) -> list[int]:
    if text is None:
        return list(FUNCTION_IDS)
    items = text if isinstance(text, (list, tuple)) else str(text).split(",")
    return [int(str(v).strip().upper().lstrip("F")) for v in items if str(v).strip()]


def _load_config(path: Optional[str]) -> dict:
    if not path:
        return {}
    with open(path) as fh:
        raw = yaml.safe_load(fh) or {}
    if not isinstance(raw, dict):
        raise SystemExit(f"config file {path} must hold a mapping of flag names to values")
    return {str(k).lstrip("-").replace("-", "_"): v for k, v in raw.items()}


def _resolve(args: argparse.Namespace) -> argparse.Namespace:
    """Fill unset flags from the config file, then from built-in defaults."""
    config = _load_config(getattr(args, "config", None))
    for key, value in vars(args).items():
        if value is None:
            if key in config:
                setattr(args, key, config[key])
            elif key in DEFAULTS:
                setattr(args, key, DEFAULTS[key])
    return args


def _read_registry(path) -> tuple[dict, dict]:
    """(sigma by (id, R^2), MIC* by distribution name) from a registry CSV."""
    sigmas, refs = {}, {}
    if path is None or not Path(path).exists():
        return sigmas, refs
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            fid = int(row["id"].upper().lstrip("F"))
            r2 = round(float(row["r_squared"]), 3)
            sigmas[(fid, r2)] = float(row["sigma"])
            if row.get("mic_star"):
                refs[f"F{fid}_R{r2:.1f}"] = float(row["mic_star"])
    return sigmas, refs


def _distributions(args):
    sigmas, refs = _read_registry(getattr(args, "registry", None))
    levels = _floats(args.levels) if args.levels is not None else list(R_SQUARED_LEVELS)
    dists = [make_distribution(fid, r2, sigmas.get((fid, round(r2, 3))))
             for fid in _function_list(args.functions) for r2 in levels]
    return dists, refs


def _params(args, mechanism: str, n: int) -> EstimatorParams:
    c_default, b_default = default_params(mechanism, float(args.epsilon), n)
    if args.B is not None:
        B = int(args.B)
    elif args.alpha is not None:
        B = b_of(n, float(args.alpha))
    else:
        B = int(b_default)
    c = float(args.c) if args.c is not None else float(c_default)
    return EstimatorParams(max(4, B), c, MasterSizing(args.sizing))


def _write_rows(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def cmd_mic(args) -> int:
    coll = ingest_csv(args.csv, columns=None)
    y = coll.columns[args.y]
    x = np.arange(1, y.size + 1, dtype=float) if args.x is None else coll.columns[args.x]
    if args.bounds:
        bounds = RangeBounds.parse(args.bounds)
    elif args.auto_bounds:
        log.warning("bounds derived from the data: the result is not differentially private")
        if args.x is None:
            bounds = RangeBounds(0.0, float(y.size + 1), *padded_bounds(y))
        else:
            bounds = RangeBounds(*padded_bounds(x), *padded_bounds(y))
    else:
        bounds = None
    mech = args.mechanism.lower()
    if mech.startswith("micr") and bounds is None:
        raise SystemExit("MICr-based mechanisms need --bounds (or --auto-bounds)")
    data = Dataset(x, y, bounds)
    params = _params(args, mech, data.n)
    priv = PrivacyParams(float(args.epsilon), int(args.seed))
    from dpmic.harness.experiment import run_mechanism
    value = run_mechanism(mech, data, bounds, params, priv)
    row = [mech, data.n, params.B, repr(params.c), repr(float(args.epsilon)), int(args.seed),
           repr(float(value))]
    print(f"{mech} = {value:.6f}  (n={data.n}, B={params.B}, c={params.c:g})")
    if args.out:
        _write_rows(args.out, ["mechanism", "n", "B", "c", "epsilon", "seed", "value"], [row])
    return 0


def cmd_synth(args) -> int:
    dists, refs = _distributions(args)
    rows = []
    for d in dists:
        ref = refs.get(d.name)
        if args.mic_star and ref is None:
            ref = mic_star(d).value
        b = d.bounds
        rows.append([f"F{d.function_id}", f"{d.r_squared:.3f}", repr(d.sigma), repr(b.x_lo),
                     repr(b.x_hi), repr(b.y_lo), repr(b.y_hi),
                     "" if ref is None else repr(float(ref))])
        print(f"{d.name:<10} sigma={d.sigma:.6f}"
              + ("" if ref is None else f"  MIC*={ref:.4f}"))
    header = ["id", "r_squared", "sigma", "x_lo", "x_hi", "y_lo", "y_hi", "mic_star"]
    if args.out:
        _write_rows(args.out, header, rows)
    if args.sample_n:
        d = dists[0]
        data = sample(d, int(args.sample_n), np.random.default_rng(int(args.seed)))
        out = args.sample_out or f"{d.name}_n{args.sample_n}.csv"
        _write_rows(out, ["x", "y"], [[repr(float(a)), repr(float(b))]
                                      for a, b in zip(data.x, data.y)])
    return 0


def _experiment_config(args, B=None, c=None) -> ExperimentConfig:
    if B is None and args.B is not None:
        B, c = int(args.B), float(args.c if args.c is not None else 5.0)
    return ExperimentConfig(args.mechanism, float(args.epsilon), int(args.iterations),
                            tuple(_ints(args.n)), B, c, int(args.seed),
                            MasterSizing(args.sizing), int(args.workers))


def cmd_experiment(args) -> int:
    cfg = _experiment_config(args)
    if args.csv:
        coll = ingest_csv(args.csv, PairingMode(args.pairs),
                          BoundsPolicy.GLOBAL if args.global_bounds else BoundsPolicy.PER_COLUMN)
        specs = coll.pair_specs()
        if args.limit:
            specs = specs[: int(args.limit)]
        targets = [DatasetTarget(coll.dataset_id(s), coll.build(s)) for s in specs]
    else:
        dists, refs = _distributions(args)
        targets = synthetic_targets(dists, refs)
    rows = run_bias_variance(cfg, targets)
    print(format_rows(rows))
    if args.bin_endpoints is not None or args.csv:
        endpoints = _floats(args.bin_endpoints) if args.bin_endpoints else BASEBALL_ENDPOINTS
        print()
        print(format_bins(bin_by_mice(rows, endpoints)))
    if args.out:
        write_results(rows, args.out)
    if args.raw_out:
        write_raw(rows, args.raw_out)
    return 1 if any(r.error for r in rows) else 0


def cmd_fuzz(args) -> int:
    rng = np.random.default_rng(int(args.seed))
    rows = []
    ok = True
    for n in _ints(args.n):
        rep = fuzz_sensitivity(args.statistic, n, int(args.trials), rng,
                               B=int(args.B) if args.B is not None else None,
                               c=float(args.c) if args.c is not None else 2.0,
                               master_sizing=MasterSizing(args.sizing))
        print(rep.summary())
        ok &= rep.passed
        rows.append([rep.statistic, rep.n, rep.B, repr(float(rep.c)), rep.trials,
                     repr(rep.max_delta), repr(rep.bound), repr(rep.cap),
                     "PASS" if rep.passed else "FAIL"])
    if args.out:
        _write_rows(args.out, ["statistic", "n", "B", "c", "trials", "max_delta", "bound",
                               "cap", "verdict"], rows)
    return 0 if ok else 1


def cmd_tune(args) -> int:
    dists, refs = _distributions(args)
    targets = synthetic_targets(dists, refs)
    grid = [(B, c) for c in _floats(args.c_grid) for B in _ints(args.B_grid)]
    rows = []
    for n in _ints(args.n):
        results = tune(args.mechanism, float(args.epsilon), n, grid, targets,
                       int(args.iterations), int(args.seed), MasterSizing(args.sizing),
                       int(args.workers))
        best = min(results, key=lambda r: (r[2], r[0], r[1]))
        for B, c, obj in results:
            rows.append([args.mechanism, repr(float(args.epsilon)), n, B, repr(c), repr(obj),
                         int((B, c) == best[:2])])
            print(f"n={n:<6} B={B:<4} c={c:<4g} WSUM={obj:.5f}{'  *' if (B, c) == best[:2] else ''}")
    if args.out:
        _write_rows(args.out, ["mechanism", "epsilon", "n", "B", "c", "wsum", "best"], rows)
    return 0


def _common(p: argparse.ArgumentParser, *names: str) -> None:
    opts = {
        "mechanism": dict(choices=MECHANISMS, help="statistic or mechanism"),
        "epsilon": dict(type=float, help="privacy parameter (default 1.0)"),
        "B": dict(type=int, help="maximum number of grid cells"),
        "c": dict(type=float, help="master partition multiplier"),
        "alpha": dict(type=float, help="set B = floor(n^alpha)"),
        "bounds": dict(help="range bounds x_lo,x_hi,y_lo,y_hi"),
        "seed": dict(type=int, help="master random seed (default 0)"),
        "iterations": dict(type=int, help="runs per target (default 50)"),
        "pairs": dict(choices=("index", "all"), help="column pairing for --csv data"),
        "bin_endpoints": dict(help="comma-separated MICe bin endpoints from 0 to 1"),
        "out": dict(help="result CSV path"),
        "sizing": dict(choices=("full", "clumped"), help="master sizing (default clumped)"),
        "n": dict(help="sample size(s), comma separated"),
        "functions": dict(help="benchmark functions, e.g. 1,12,F21 (default all)"),
        "levels": dict(help="R^2 levels, comma separated (default 0.1..0.9)"),
        "registry": dict(help="distribution registry CSV (cached sigma / MIC*)"),
        "workers": dict(type=int, help="worker processes (default 1)"),
    }
    for name in names:
        flag = "--" + name.replace("_", "-")
        p.add_argument(flag, dest=name, default=None, **opts[name])


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dpmic", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("mic", help="compute one statistic on a CSV column pair")
    p.add_argument("--config")
    p.add_argument("--csv", required=True)
    p.add_argument("--x", help="x column (default: row index 1..n)")
    p.add_argument("--y", required=True, help="y column")
    p.add_argument("--auto-bounds", action="store_true",
                   help="pad the observed range (not private)")
    _common(p, "mechanism", "epsilon", "B", "c", "alpha", "bounds", "seed", "sizing", "out")
    p.set_defaults(func=cmd_mic)

    p = sub.add_parser("synth", help="calibrate the benchmark distributions")
    p.add_argument("--config")
    p.add_argument("--mic-star", action="store_true", help="also estimate MIC*")
    p.add_argument("--sample-n", type=int, help="write one sample of this size")
    p.add_argument("--sample-out")
    _common(p, "functions", "levels", "registry", "seed", "out")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("experiment", help="bias/variance sweep")
    p.add_argument("--config")
    p.add_argument("--csv", help="real-data CSV (otherwise synthetic distributions)")
    p.add_argument("--global-bounds", action="store_true",
                   help="one padded range shared by every column")
    p.add_argument("--limit", type=int, help="only the first N column pairs")
    p.add_argument("--raw-out", help="per-run outputs CSV")
    _common(p, "mechanism", "epsilon", "B", "c", "seed", "iterations", "pairs",
            "bin_endpoints", "out", "sizing", "n", "functions", "levels", "registry",
            "workers")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("fuzz", help="empirical sensitivity fuzzing")
    p.add_argument("--config")
    p.add_argument("--statistic", choices=("mice", "micr"))
    p.add_argument("--trials", type=int)
    _common(p, "n", "B", "c", "seed", "sizing", "out")
    p.set_defaults(func=cmd_fuzz)

    p = sub.add_parser("tune", help="WSUM grid search over (B, c)")
    p.add_argument("--config")
    p.add_argument("--B-grid", dest="B_grid")
    p.add_argument("--c-grid", dest="c_grid")
    _common(p, "mechanism", "epsilon", "n", "iterations", "functions", "levels",
            "registry", "seed", "sizing", "workers", "out")
    p.set_defaults(func=cmd_tune)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    args = _resolve(args)
    if args.command == "fuzz" and args.n == DEFAULTS["n"]:
        args.n = "50,200"
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
