"""Command-line entry point: ``affinity-sim <command> [options]``.

Exit codes: 0 ok, 2 usage or config error, 3 invariant violation, 4 internal error.
"""
from __future__ import annotations

import argparse
import csv
import io
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .capacity import max_scalar_throughput, min_max_load
from .experiments import (COUNTEREXAMPLE_RATES, counterexample, report_rows, sweep,
                          worker_count)
from .model import RateMatrix
from .report import read_csv, write_csv
from .scenario import ConfigError, Scenario, builtin_config, load_scenario
from .sim import InvariantViolation
from .workloads import effective_rates

EXIT_OK, EXIT_CONFIG, EXIT_INVARIANT, EXIT_INTERNAL = 0, 2, 3, 4

log = logging.getLogger("affinity_sim")


class UsageError(Exception):
    pass


def _load(config: str | None, default: str | None = "three_server") -> Scenario:
    """A path, or the name of a bundled config when no such file exists."""
    if config is None:
        if default is None:
            raise UsageError("--config is required")
        config = default
    path = Path(config)
    if not path.exists():
        bundled = builtin_config(config)
        if bundled.exists():
            path = bundled
    return load_scenario(path)


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _fmt_summary(summaries) -> str:
    lines = [f"{'policy':<16}{'lambda':>8}{'mean CT':>12}{'2sd':>9}{'slope':>12}{'viol':>6}"]
    for s in summaries:
        ct, sd = s.mean_completion_time
        slope, _ = s.backlog_slope
        lines.append(f"{s.policy:<16}{s.lam:>8.3g}{ct:>12.4f}{2 * sd:>9.3f}{slope:>12.2e}"
                     f"{s.invariant_violations:>6d}")
    return "\n".join(lines)


def cmd_run(args) -> int:
    scenario = _load(args.config, default=None)
    if args.lambdas:
        scenario = Scenario(**{**scenario.__dict__, "lambdas": args.lambdas})
    out = _out_dir(args)
    t0 = time.perf_counter()
    summaries = sweep(scenario, seed=args.seed, invariant_checks=False if args.no_invariants else None,
                      workers=worker_count())
    rows = report_rows(summaries)
    csv_path = out / f"{args.name or scenario.name}.csv"
    write_csv(rows, csv_path)
    print(_fmt_summary(summaries))
    print(f"wrote {csv_path} ({len(rows)} rows, {time.perf_counter() - t0:.1f}s)")
    if not args.no_plot:
        from .plotting import completion_time_figure
        svg = completion_time_figure(rows, csv_path.with_suffix(".svg"))
        print(f"wrote {svg}")
    if any(r.invariant_violations for r in rows):
        return EXIT_INVARIANT
    return EXIT_OK


def cmd_capacity(args) -> int:
    scenario = _load(args.config)
    B = scenario.rate_matrix()
    t0 = time.perf_counter()
    lam_star = max_scalar_throughput(B, scenario.proportions, tol=args.tol)
    elapsed = time.perf_counter() - t0
    load, x = min_max_load(B, lam_star * np.asarray(scenario.proportions))
    print(f"scenario: {scenario.name}")
    print(f"lambda* = {lam_star:.7f}  (bisection tol {args.tol:g}, {elapsed * 1e3:.1f} ms)")
    print("witness decomposition at lambda* (rows: types, columns: servers):")
    for i, row in enumerate(x):
        print(f"  type {i + 1}: " + "  ".join(f"{v:8.4f}" for v in row))
    loads = (x / B.values).sum(axis=0)
    print("server loads: " + "  ".join(f"{v:.4f}" for v in loads) + f"  (max {load:.6f})")
    if scenario.service_kind == "lognormal":
        rng = np.random.default_rng(args.seed if args.seed is not None else scenario.seed)
        B_eff = RateMatrix(effective_rates(scenario.service_spec(), B.values, rng, args.samples))
        lam_eff = max_scalar_throughput(B_eff, scenario.proportions, tol=args.tol)
        print(f"discretised lognormal (sigma={scenario.sigma}): effective rates")
        for row in B_eff.values:
            print("  " + "  ".join(f"{v:.4f}" for v in row))
        print(f"effective lambda* = {lam_eff:.5f}")
    return EXIT_OK


def cmd_counterexample(args) -> int:
    out = _out_dir(args)
    seed = 1 if args.seed is None else args.seed
    runs = counterexample(horizon=args.horizon, warmup=args.horizon // 10, seed=seed,
                          invariant_checks=not args.no_invariants)
    print(f"two servers, two types, deterministic services, rates {COUNTEREXAMPLE_RATES} "
          "(reconstructed)")
    print("blind GB-PANDAS, misleading initial estimates")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["lambda_per_type", "exploration", "mean_completion_time", "backlog_slope",
                "in_system_at_end", "invariant_violations"])
    series = {}
    by = {}
    for r in runs:
        rep = r.summary.reports[0]
        by[(r.lam, r.explore)] = r
        w.writerow([repr(r.lam), r.explore, repr(r.mean_completion_time), repr(r.backlog_slope),
                    rep.in_system, rep.invariant_violations])
        series[r.label] = (rep.sample_times, rep.backlog)
        print(f"  {r.label:<28} mean CT {r.mean_completion_time:12.4f}   slope {r.backlog_slope:10.3e}")
    for lam in sorted({r.lam for r in runs}):
        ratio = by[(lam, False)].mean_completion_time / by[(lam, True)].mean_completion_time
        print(f"  lambda_i={lam}: no-exploration / exploration completion time = {ratio:.3f}")
    (out / "counterexample.csv").write_text(buf.getvalue())
    from .plotting import backlog_figure
    backlog_figure(series, out / "counterexample.svg", title="misleading start, with and without exploration")
    print(f"wrote {out / 'counterexample.csv'} and {out / 'counterexample.svg'}")
    if any(r.summary.invariant_violations for r in runs):
        return EXIT_INVARIANT
    return EXIT_OK


def cmd_plot(args) -> int:
    try:
        rows = read_csv(args.csv)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read report {args.csv}: {exc}") from exc
    if not rows:
        raise ConfigError(f"{args.csv} has no data rows")
    from .plotting import completion_time_figure
    target = Path(args.output) if args.output else Path(args.csv).with_suffix(".svg")
    print(f"wrote {completion_time_figure(rows, target)}")
    return EXIT_OK


def cmd_validate(args) -> int:
    from .validate import all_passed, run_checks
    results = run_checks(fault=args.inject_fault, horizon=args.horizon)
    for r in results:
        print(r.line())
    ok = all_passed(results)
    print("all checks passed" if ok else "validation FAILED")
    return EXIT_OK if ok else EXIT_INVARIANT


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="affinity-sim", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH",
                        help="scenario YAML, or the name of a bundled config (three_server, ...)")
    common.add_argument("--seed", type=int, default=None, help="override the config's master seed")
    common.add_argument("--out", metavar="DIR", default="results", help="output directory (default: results)")
    common.add_argument("--no-invariants", action="store_true", help="skip per-slot invariant checks")

    for name, help_ in (("run", "simulate every (policy, lambda) pair of a config"),
                        ("sweep", "same as run; --lambdas replaces the config's sweep")):
        p = sub.add_parser(name, parents=[common], help=help_)
        p.add_argument("--lambdas", type=float, nargs="+", default=None)
        p.add_argument("--name", default=None, help="report file stem (default: config name)")
        p.add_argument("--no-plot", action="store_true")
        p.set_defaults(func=cmd_run)

    p = sub.add_parser("capacity", parents=[common], help="largest stabilisable total arrival rate")
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--samples", type=int, default=1_000_000, help="Monte-Carlo samples per rate")
    p.set_defaults(func=cmd_capacity)

    p = sub.add_parser("counterexample", parents=[common],
                       help="exploration off vs on from a misleading initial estimate")
    p.add_argument("--horizon", type=int, default=20_000)
    p.set_defaults(func=cmd_counterexample)

    p = sub.add_parser("plot", help="render a report CSV as SVG")
    p.add_argument("csv")
    p.add_argument("-o", "--output", default=None)
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("validate", help="run the built-in invariant suite")
    p.add_argument("--horizon", type=int, default=3000, help="slots per policy")
    p.add_argument("--inject-fault", default=None, help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_validate)
    return ap


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_CONFIG
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InvariantViolation as exc:
        print(f"invariant violation at {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except Exception as exc:  # noqa: BLE001
        log.debug("internal error", exc_info=True)
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
