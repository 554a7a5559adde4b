"""Command line: exponent sweeps, tail scans and codebook simulations.

Every CSV is written next to a JSON run manifest recording the resolved
configuration, the tool version, the exact argument vector and timings;
``trcld rerun MANIFEST`` replays a run from its manifest.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__
from . import exponents as ex
from .core import DistributionError, ExtRealError, prob_vec, read_channel, z_channel
from .ensemble import (PE_BUDGET, BudgetExceeded, EnumeratorReport, TrialResult, enumerator_report,
                       exact_error_prob, sample_codebook, summarize_trials)
from .functionals import ModelConfig
from .optimizer import GridSpec

EXIT_OK, EXIT_INPUT, EXIT_BUDGET, EXIT_INTERNAL = 0, 2, 3, 4

EXPONENT_HEADER = ["rate", "e_r", "e_trc", "e_trc_ml", "e_ex", "e_tilde", "e0_min"]
TAIL_HEADER = ["e0", "lt_ub", "lt_lb", "ut_ub", "ut_lb", "in_corollary_window"]
TRIAL_HEADER = ["trial", "seed", "pe", "exponent"]
ENUM_HEADER = ["type_id", "q00", "q01", "q10", "q11", "count"]


class InvariantViolation(RuntimeError):
    pass


def fmt(v) -> str:
    """Nine significant digits; ``inf`` for +infinity."""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    if v == math.inf:
        return "inf"
    if v == -math.inf:
        return "-inf"
    if math.isnan(v):
        raise InvariantViolation("NaN reached the output")
    out = f"{v:.9g}"
    return "0" if out == "-0" else out


def parse_range(text: str) -> np.ndarray:
    """``a:b:step`` (inclusive) or a single number."""
    parts = text.split(":")
    try:
        nums = [float(p) for p in parts]
    except ValueError:
        raise ValueError(f"bad grid {text!r}") from None
    if len(nums) == 1:
        return np.array(nums)
    if len(nums) != 3:
        raise ValueError(f"grid must be a:b:step, got {text!r}")
    a, b, step = nums
    if step <= 0 or b < a:
        raise ValueError(f"empty or ill-formed grid {text!r}")
    count = int(math.floor((b - a) / step + 1e-9)) + 1
    return np.round(a + step * np.arange(count), 12)


def parse_qx(text: str) -> np.ndarray:
    try:
        vals = [float(t) for t in text.split(",")]
    except ValueError:
        raise ValueError(f"bad input distribution {text!r}") from None
    return prob_vec(vals, tol=1e-9)


def build_config(args) -> ModelConfig:
    w = read_channel(args.channel) if args.channel else z_channel()
    qx = parse_qx(args.qx)
    grid = GridSpec(resolution=args.resolution, depth=args.depth, shrink=args.shrink)
    return ModelConfig.create(w, qx, args.metric, grid=grid, mid_grid=grid)


def describe_config(cfg: ModelConfig) -> dict:
    return {
        "channel": cfg.channel.tolist(),
        "qx": cfg.qx.tolist(),
        "metric": cfg.metric.name,
        "metric_coef": [[fmt(c) for c in row] for row in cfg.metric.coef],
        "grid": asdict(cfg.grid),
        "mid_grid": asdict(cfg.mid_grid),
        "inner_grid": asdict(cfg.inner_grid),
    }


def write_csv(path: Path, header, rows):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(header)
        for row in rows:
            wr.writerow([fmt(v) for v in row])


def write_manifest(out: Path, argv, cfg, started, timings, extra=None):
    man = {
        "tool": "trcld",
        "version": __version__,
        "argv": list(argv),
        "config": describe_config(cfg),
        "wall_clock_s": time.time() - started,
        "point_timing_s": timings,
    }
    if extra:
        man.update(extra)
    Path(str(out) + ".manifest.json").write_text(json.dumps(man, indent=2) + "\n")


def _pool_map(fn, items, jobs: int):
    """Ordered map, optionally over a process pool."""
    if jobs <= 1:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# exponents


def _exponent_row(job):
    cfg, r = job
    t0 = time.time()
    row = [r,
           ex.random_coding_exponent(r, cfg).value,
           ex.trc_exponent(r, cfg).value,
           ex.trc_exponent_ml(r, cfg).value,
           ex.expurgated_exponent(r, cfg).value,
           ex.e_tilde(r, cfg).value,
           ex.e0_min(r, cfg).value]
    return row, time.time() - t0


def cmd_exponents(args, argv) -> int:
    cfg = build_config(args)
    rates = parse_range(args.rates)
    if (rates < 0).any():
        raise ValueError("rates must be nonnegative")
    started = time.time()
    results = _pool_map(_exponent_row, [(cfg, float(r)) for r in rates], args.jobs)
    out = Path(args.out)
    write_csv(out, EXPONENT_HEADER, [row for row, _ in results])
    write_manifest(out, argv, cfg, started, [t for _, t in results])
    return EXIT_OK


# ---------------------------------------------------------------------------
# tails


def _tail_row(job):
    cfg, r, e0 = job
    t0 = time.time()
    ut_lb = ex.ut_lower(r, e0, cfg)
    row = [e0,
           ex.lt_upper(r, e0, cfg).value,
           ex.lt_lower(r, e0, cfg).value,
           ex.ut_upper(r, e0, cfg).value,
           ut_lb.value,
           bool(ut_lb.witness.get("in_window", False))]
    return row, time.time() - t0


def check_tail_monotonicity(rows) -> dict:
    """Lower-tail columns must not increase in e0, upper-tail columns must not decrease."""
    cols = {name: np.array([float(r[i]) for r in rows]) for i, name in enumerate(TAIL_HEADER[:5])}
    report = {}
    with np.errstate(invalid="ignore"):
        for name in ("lt_ub", "lt_lb"):
            d = np.diff(cols[name])
            report[name] = bool(np.all((d <= 1e-9) | np.isnan(d)))
        for name in ("ut_ub", "ut_lb"):
            report[name] = bool(np.all(np.diff(cols[name]) >= -1e-9))
    return report


def cmd_tails(args, argv) -> int:
    cfg = build_config(args)
    r = float(args.rate)
    if r < 0:
        raise ValueError("rate must be nonnegative")
    grid = parse_range(args.e0)
    started = time.time()
    # the sampled landscape is built once; each row is then a cheap lookup,
    # so rows stay in this process (workers would each rebuild the landscape)
    land = ex.landscape(r, cfg)
    land.profile()
    results = [_tail_row((cfg, r, float(e))) for e in grid]
    rows = [row for row, _ in results]
    mono = check_tail_monotonicity(rows)
    out = Path(args.out)
    write_csv(out, TAIL_HEADER, rows)
    summary = {"rate": r, "e_trc": land.e_trc().value, "e_tilde": land.e_tilde().value,
               "e_ex": land.e_ex().value, "e0_min": land.e0_min().value, "monotone": mono}
    write_manifest(out, argv, cfg, started, [t for _, t in results], {"summary": summary})
    print("monotonicity: " + ", ".join(f"{k}={'ok' if v else 'VIOLATED'}" for k, v in mono.items()))
    if not all(mono.values()):
        raise InvariantViolation("tail columns are not monotone in e0")
    return EXIT_OK


# ---------------------------------------------------------------------------
# simulate


def _sim_trial(job):
    n, m, cfg, seed, trial = job
    t0 = time.time()
    cb = sample_codebook(n, m, cfg.qx, seed, trial)
    res = TrialResult(trial, seed, exact_error_prob(cb, cfg.channel, cfg.metric), n)
    rep = enumerator_report(cb, nx=len(cfg.qx))
    if sum(rep.pair_counts.values()) != m * (m - 1):
        raise InvariantViolation("enumerator counts do not sum to M(M-1)")
    return res, rep.pair_counts, time.time() - t0


def cmd_simulate(args, argv) -> int:
    cfg = build_config(args)
    n, m, trials = args.n, args.codewords, args.trials
    if n < 1 or m < 1 or trials < 1:
        raise ValueError("n, codewords and trials must be positive")
    if cfg.channel.shape != (2, 2):
        raise ValueError("the enumerator table is defined for binary alphabets")
    ny = cfg.channel.shape[1]
    terms = ny ** n * m * m
    if terms > PE_BUDGET:
        raise BudgetExceeded("exact error probability", terms, PE_BUDGET)
    thresholds = [float(e) for e in parse_range(args.e0)] if args.e0 else []
    started = time.time()
    results = _pool_map(_sim_trial, [(n, m, cfg, args.seed, t) for t in range(trials)], args.jobs)
    trial_rows, totals = [], {}
    for res, counts, _ in results:
        trial_rows.append([res.trial, res.seed, res.pe, res.exponent])
        for k, c in counts.items():
            totals[k] = totals.get(k, 0) + c
    out = Path(args.out)
    write_csv(out, TRIAL_HEADER, trial_rows)
    agg = EnumeratorReport(n, m, totals)
    enum_path = out.with_name(out.stem + ".enumerators.csv")
    write_csv(enum_path, ENUM_HEADER, agg.rows())
    rep = summarize_trials(n, m, [r for r, _, _ in results], thresholds)
    summary = {
        "implied_rate": math.log(m) / n,
        "median_exponent": rep.median,
        "zero_pe_trials": rep.zero_pe,
        "lower_tail": {fmt(k): v for k, v in rep.lower_mass.items()},
        "upper_tail": {fmt(k): v for k, v in rep.upper_mass.items()},
    }
    write_manifest(out, argv, cfg, started, [t for _, _, t in results],
                   {"summary": summary, "outputs": [str(out), str(enum_path)]})
    write_manifest(enum_path, argv, cfg, started, [], {"summary": summary})
    print(f"implied rate {fmt(summary['implied_rate'])}, median exponent {fmt(rep.median)}, "
          f"P_e = 0 in {rep.zero_pe} trials")
    for e0 in thresholds:
        print(f"  e0={fmt(e0)}: P(E <= e0) = {fmt(rep.lower_mass[e0])}, "
              f"P(E >= e0) = {fmt(rep.upper_mass[e0])}")
    return EXIT_OK


# ---------------------------------------------------------------------------


def cmd_rerun(args, argv) -> int:
    man = json.loads(Path(args.manifest).read_text())
    if "argv" not in man:
        raise ValueError("manifest has no argument vector")
    return main(man["argv"])


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="trcld", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"trcld {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--channel", help="channel matrix file (default: z-channel, crossover 0.001)")
    common.add_argument("--qx", default="0.5,0.5", help="input composition, comma separated")
    common.add_argument("--metric", default="ml-log", help="ml-log, zero, scaled:B or file:PATH")
    common.add_argument("--resolution", type=int, default=33, help="grid points per axis")
    common.add_argument("--depth", type=int, default=4, help="refinement levels")
    common.add_argument("--shrink", type=float, default=0.2, help="box shrink factor per level")
    common.add_argument("--jobs", type=int, default=1, help="worker processes")
    common.add_argument("--out", required=True, help="output CSV path")

    p = sub.add_parser("exponents", parents=[common], help="exponent curves over a rate grid")
    p.add_argument("--rates", required=True, help="rate grid a:b:step (inclusive)")
    p.set_defaults(func=cmd_exponents)

    p = sub.add_parser("tails", parents=[common], help="tail exponents at a fixed rate")
    p.add_argument("--rate", required=True, type=float)
    p.add_argument("--e0", required=True, help="E_0 grid a:b:step (inclusive)")
    p.set_defaults(func=cmd_tails)

    p = sub.add_parser("simulate", parents=[common], help="random codebooks with exact error probabilities")
    p.add_argument("--n", type=int, required=True, help="block length")
    p.add_argument("--codewords", type=int, required=True, help="codebook size M")
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--e0", help="exponent thresholds a:b:step for the empirical tails")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("rerun", help="replay a run from its manifest")
    p.add_argument("manifest")
    p.set_defaults(func=cmd_rerun)
    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INPUT
    try:
        return args.func(args, argv)
    except BudgetExceeded as exc:
        print(f"error: budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (InvariantViolation, ExtRealError) as exc:
        print(f"error: internal invariant violated: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except (ValueError, DistributionError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
