"""Command-line entry point: ``banditlab {bench,tune,trial,report,population}``.

Exit codes: 0 success, 2 configuration or input-schema error, 3 I/O
error, 4 checksum mismatch found by ``report``.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
import time
from importlib import metadata
from pathlib import Path


from . import kernel
from .config import ALGORITHMS, Config, load_config
from .errors import BanditLabError
from .harness import ExperimentConfig, run_experiment, tune
from .output import (MANIFEST_NAME, OutputWriter, format_value, load_manifest,
                     read_csv, verify_manifest)
from .trial import (TREATMENTS, STRATEGY_NAMES, StrategySpec, TrialConfig, load_population,
                    repeat_trials, synthetic_population, write_population)

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_CHECKSUM = 0, 2, 3, 4
SEED_ENV = "BANDITLAB_SEED"

log = logging.getLogger("banditlab")


class UsageError(BanditLabError):
    pass


def _version():
    try:
        return metadata.version("banditlab")
    except metadata.PackageNotFoundError:
        return "unknown"


def resolve_seed(cli_seed, config_seed):
    """``--seed`` wins, then the config file, then ``BANDITLAB_SEED``, then 0."""
    if cli_seed is not None:
        return cli_seed
    if config_seed is not None:
        return config_seed
    env = os.environ.get(SEED_ENV)
    if env not in (None, ""):
        try:
            value = int(env)
        except ValueError:
            raise UsageError(f"{SEED_ENV} must be an integer, got {env!r}") from None
        if value < 0:
            raise UsageError(f"{SEED_ENV} must be nonnegative")
        return value
    return 0


def _params_text(params):
    parts = []
    for k in sorted(params):
        v = params[k]
        if isinstance(v, (tuple, list)):
            v = ":".join(format_value(float(x)) for x in v)
        else:
            v = format_value(float(v))
        parts.append(f"{k}={v}")
    return ";".join(parts)


def _cell_name(family, arm_count, variance):
    return f"{family.name.lower()}_K{arm_count}_var{format_value(float(variance))}"


def _cells(bench, arm_counts=None):
    for family in bench.families:
        for k in arm_counts or bench.arm_counts:
            for var in bench.variances:
                yield family, k, var


def _load(args) -> Config:
    return load_config(args.config) if args.config else Config()


def _common_manifest(args, command, seed, started, cfg):
    return dict(command=command, master_seed=seed, version=_version(), backend=kernel.BACKEND,
                threads=args.threads, duration_seconds=round(time.time() - started, 3),
                config_file=str(args.config) if args.config else None, config=cfg.raw)


# --- bench -------------------------------------------------------------------

def cmd_bench(args):
    started = time.time()
    cfg = _load(args)
    bench = cfg.bench
    seed = resolve_seed(args.seed, bench.master_seed)
    reps = args.reps or bench.repetitions
    out = OutputWriter(args.out)
    summary = []
    for family, k, var in _cells(bench):
        cell = _cell_name(family, k, var)
        for alg in bench.algorithms:
            params = bench.params_for(alg, k, var)
            ec = ExperimentConfig(k, var, alg, params, family, bench.mean_mode,
                                  bench.horizon, reps, seed)
            log.info("bench %s %s %s", cell, alg, _params_text(params))
            agg = run_experiment(ec, threads=args.threads)
            cum = agg.cumulative_regret_curve
            out.write_csv(f"{cell}/{alg}/regret_curve.csv",
                          ["turn", "mean_regret", "cum_regret", "optimal_fraction"],
                          [(t + 1, agg.regret_curve[t], cum[t], agg.optimal_fraction_curve[t])
                           for t in range(bench.horizon)])
            summary.append((family.name.lower(), k, var, alg, _params_text(params),
                            agg.mean_total_regret, agg.std_error_total_regret))
    header = ["family", "arm_count", "variance", "algorithm", "params",
              "mean_total_regret", "std_error"]
    for family, k, var in _cells(bench):
        rows = [r for r in summary if r[:3] == (family.name.lower(), k, var)]
        out.write_csv(f"{_cell_name(family, k, var)}/summary.csv", header, rows)
    out.write_csv("summary.csv", header, summary)
    out.write_manifest(horizon=bench.horizon, repetitions=reps,
                       **_common_manifest(args, "bench", seed, started, cfg))
    _print_bench(read_csv(Path(args.out) / "summary.csv"))
    return EXIT_OK


# --- tune --------------------------------------------------------------------

def cmd_tune(args):
    started = time.time()
    cfg = _load(args)
    bench = cfg.bench
    seed = resolve_seed(args.seed, bench.master_seed)
    reps = args.reps or bench.repetitions
    alg = args.algorithm or bench.tune_algorithm
    param = args.parameter or bench.tune_parameter
    grid = tuple(args.grid) if args.grid else bench.tune_grid
    if alg not in ALGORITHMS:
        raise UsageError(f"unknown algorithm {alg!r}")
    # Without an explicit arm_count the search runs on ten arms.
    ks = None if "arm_count" in cfg.raw.get("experiment", {}) else (10,)
    out = OutputWriter(args.out)
    summary = []
    for family, k, var in _cells(bench, ks):
        cell = _cell_name(family, k, var)
        params = bench.params_for(alg, k, var)
        params[param] = grid[0]
        ec = ExperimentConfig(k, var, alg, params, family, bench.mean_mode,
                              bench.horizon, reps, seed)
        log.info("tune %s %s.%s", cell, alg, param)
        res = tune(ec, param, grid, threads=args.threads, common_streams=not args.independent)
        out.write_csv(f"{cell}/tune_{alg}_{param}.csv",
                      ["value", "mean_total_regret", "std_error", "best"],
                      [(v, a.mean_total_regret, a.std_error_total_regret, v == res.best_value)
                       for v, a in res.table])
        best = res.best
        summary.append((family.name.lower(), k, var, alg, param, res.best_value,
                        best.mean_total_regret, best.std_error_total_regret))
    out.write_csv("summary.csv", ["family", "arm_count", "variance", "algorithm", "parameter",
                                  "best_value", "mean_total_regret", "std_error"], summary)
    out.write_manifest(horizon=bench.horizon, repetitions=reps, grid=list(grid),
                       common_streams=not args.independent,
                       **_common_manifest(args, "tune", seed, started, cfg))
    _print_tune(args.out, load_manifest(args.out))
    return EXIT_OK


# --- trial -------------------------------------------------------------------

def _population(args, settings):
    if args.population:
        return str(args.population), load_population(args.population)
    source = args.synthetic or settings.population
    if source in ("in", "out"):
        return f"synthetic:{source}", synthetic_population(source)
    return source, load_population(source)


def cmd_trial(args):
    started = time.time()
    cfg = _load(args)
    settings = cfg.trial
    seed = resolve_seed(args.seed, settings.seed)
    reps = args.reps or settings.repetitions
    strategies = settings.strategies
    if args.strategy:
        strategies = tuple(s.strip() for s in args.strategy.split(",") if s.strip())
        unknown = [s for s in strategies if s not in STRATEGY_NAMES]
        if unknown or not strategies:
            raise UsageError(f"unknown strategy {unknown}; choose from {list(STRATEGY_NAMES)}")
    source, population = _population(args, settings)
    out = OutputWriter(args.out)
    summary = []
    for name in strategies:
        spec = StrategySpec(name, settings.params_for(name))
        tc = TrialConfig(spec, settings.patient_count, settings.accrual_weeks,
                         settings.feedback_delay_days, seed)
        log.info("trial %s %s", name, _params_text(spec.params))
        res = repeat_trials(tc, population, reps, threads=args.threads)
        chi2 = res.chi2
        out.write_csv(f"{name}/treated_per_day.csv", ["admission_day", "mean_successes"],
                      list(zip(tc.admission_days, res.treated_per_day)))
        stats = ((chi2.statistic, chi2.p_value, chi2.uncorrected_p_value, chi2.corrected)
                 if chi2 is not None else ("nan", "nan", "nan", "false"))
        out.write_csv(f"{name}/contingency.csv",
                      ["treatment", "success", "failure", "chi2_statistic", "p_value",
                       "uncorrected_p_value", "yates_corrected"],
                      [(TREATMENTS[i], res.contingency[i, 0], res.contingency[i, 1], *stats)
                       for i in range(2)])
        out.write_csv(f"{name}/km.csv", ["day", "retention"],
                      [(d + 1, v) for d, v in enumerate(res.km_curve)])
        out.write_csv(f"{name}/adverse.csv", ["day", "adverse_effects_per_patient"],
                      [(d + 1, v) for d, v in enumerate(res.adverse_curve)])
        out.write_csv(f"{name}/cravings.csv", ["mean_arsw", "mean_vas"],
                      [(res.mean_arsw, res.mean_vas)])
        summary.append((name, _params_text(spec.params), res.contingency[0].sum(),
                        res.contingency[1].sum(), res.treated_total, stats[1], stats[3],
                        res.mean_arsw, res.mean_vas))
    out.write_csv("summary.csv", ["strategy", "params", "assigned_bupnal", "assigned_clon",
                                  "treated", "p_value", "yates_corrected", "mean_arsw",
                                  "mean_vas"], summary)
    out.write_manifest(population=source, repetitions=reps,
                       patient_count=settings.patient_count,
                       accrual_weeks=settings.accrual_weeks,
                       feedback_delay_days=settings.feedback_delay_days,
                       **_common_manifest(args, "trial", seed, started, cfg))
    _print_trial(read_csv(Path(args.out) / "summary.csv"))
    return EXIT_OK


def cmd_population(args):
    pop = synthetic_population(args.synthetic)
    write_population(pop, args.out)
    print(f"wrote {sum(len(a) for a in pop.arms)} patients to {args.out}")
    return EXIT_OK


# --- report ------------------------------------------------------------------

def _table(header, rows):
    widths = [max(len(h), *(len(r[i]) for r in rows)) if rows else len(h)
              for i, h in enumerate(header)]
    lines = ["  ".join(h.ljust(w) for h, w in zip(header, widths))]
    lines.append("  ".join("-" * w for w in widths))
    lines += ["  ".join(c.ljust(w) for c, w in zip(r, widths)) for r in rows]
    return "\n".join(lines)


def _g(text, digits=4):
    try:
        return f"{float(text):.{digits}g}"
    except ValueError:
        return text


def _print_bench(rows):
    cells = []
    for r in rows:
        key = (r["family"], r["arm_count"], r["variance"])
        if key not in cells:
            cells.append(key)
    for fam, k, var in cells:
        sub = [r for r in rows if (r["family"], r["arm_count"], r["variance"]) == (fam, k, var)]
        sub.sort(key=lambda r: float(r["mean_total_regret"]))
        print(f"\n{fam} rewards, K={k}, variance={var}")
        print(_table(["algorithm", "params", "mean total regret", "s.e."],
                     [[r["algorithm"], r["params"], _g(r["mean_total_regret"]),
                       _g(r["std_error"], 2)] for r in sub]))


def _print_tune(root, manifest):
    rows = read_csv(Path(root) / "summary.csv")
    for r in rows:
        cell = f"{r['family']}_K{r['arm_count']}_var{r['variance']}"
        name = f"{cell}/tune_{r['algorithm']}_{r['parameter']}.csv"
        print(f"\n{r['algorithm']} {r['parameter']}, {r['family']} rewards, "
              f"K={r['arm_count']}, variance={r['variance']}")
        table = read_csv(Path(root) / name)
        table.sort(key=lambda t: float(t["mean_total_regret"]))
        print(_table(["value", "mean total regret", "s.e.", ""],
                     [[t["value"], _g(t["mean_total_regret"]), _g(t["std_error"], 2),
                       "*" if t["best"] == "true" else ""] for t in table]))


def _print_trial(rows):
    rows = sorted(rows, key=lambda r: -float(r["treated"]))
    print(_table(["strategy", "params", "bupnal", "clon", "treated", "p-value", "ARSW", "VAS"],
                 [[r["strategy"], r["params"], _g(r["assigned_bupnal"]), _g(r["assigned_clon"]),
                   _g(r["treated"]), _g(r["p_value"], 2), _g(r["mean_arsw"]),
                   _g(r["mean_vas"])] for r in rows]))


def cmd_report(args):
    root = Path(args.directory or args.out)
    if not root.is_dir() or not any(root.iterdir()):
        raise FileNotFoundError(f"no results in {root}")
    if not (root / MANIFEST_NAME).is_file():
        raise FileNotFoundError(f"{root} has no {MANIFEST_NAME}")
    manifest = load_manifest(root)
    bad = verify_manifest(root, manifest)
    for name in bad:
        print(f"warning: checksum mismatch or missing file: {name}", file=sys.stderr)
    command = manifest.get("command")
    print(f"{command} results in {root} (seed {manifest.get('master_seed')}, "
          f"{manifest.get('repetitions')} repetitions, backend {manifest.get('backend')})")
    summary = root / "summary.csv"
    if "summary.csv" not in bad:
        if command == "bench":
            _print_bench(read_csv(summary))
        elif command == "tune":
            _print_tune(root, manifest)
        elif command == "trial":
            _print_trial(read_csv(summary))
    return EXIT_CHECKSUM if bad else EXIT_OK


# --- argument parsing --------------------------------------------------------

def _nonneg_int(text):
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError("must be nonnegative")
    return value


def _pos_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be positive")
    return value


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="INI configuration file")
    common.add_argument("--out", type=Path, default=Path("results"), help="output directory")
    common.add_argument("--seed", type=_nonneg_int, help=f"master seed (default: config, "
                                                         f"${SEED_ENV}, then 0)")
    common.add_argument("--threads", type=_pos_int, default=1)
    common.add_argument("--reps", type=_pos_int, help="override the repetition count")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="banditlab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=_version())
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("bench", parents=[common], help="regret benchmark grid")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("tune", parents=[common], help="grid search of one parameter")
    p.add_argument("--algorithm", choices=ALGORITHMS)
    p.add_argument("--parameter")
    p.add_argument("--grid", type=float, nargs="+")
    p.add_argument("--independent", action="store_true",
                   help="give every grid point its own seed stream")
    p.set_defaults(func=cmd_tune)

    p = sub.add_parser("trial", parents=[common], help="adaptive trial simulation")
    src = p.add_mutually_exclusive_group()
    src.add_argument("--population", type=Path, help="patient CSV file")
    src.add_argument("--synthetic", choices=("in", "out"))
    p.add_argument("--strategy", help="comma-separated strategy names")
    p.set_defaults(func=cmd_trial)

    p = sub.add_parser("report", parents=[common], help="summarise a results directory")
    p.add_argument("directory", nargs="?", type=Path)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("population", help="write a synthetic population as CSV")
    p.add_argument("--synthetic", choices=("in", "out"), required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("-v", "--verbose", action="store_true")
    p.set_defaults(func=cmd_population)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except BanditLabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
