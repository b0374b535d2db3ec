"""Command-line front end.

Subcommands map one-to-one onto the library's experiment entry points:

  calibrate         bootstrap-calibrate a chart from a historical CSV
  simulate          replicated FAR/ARL1 study of a canned or file-defined scenario
  runlength-verify  distribution-free ARL verification table
  monitor-csv       calibrate on one CSV, monitor permutations of another
  snr-table         shift sizes in marginal-SD units on the sine grid

Defaults are desk scale (reps 200, ARL0 200, cap 5000) so every command
finishes in minutes; --paper-scale restores the full-size settings
(reps 1000, ARL0 1000, cap 25000).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .calibration import BootstrapPlan, bootstrap_calibrate, calibration_report
from .errors import ProfmonError
from .harness import (
    CsvMonitorConfig,
    ExperimentConfig,
    Scenario,
    emit_report,
    load_config,
    load_profiles_csv,
    monitor_csv,
    run_scenario,
    runlength_verify,
)
from .processes import MonitorGrid, simulation_study, snr_table

_DESK = {"reps": 200, "arl0": 200, "cap": 5000, "m": 1000}
_PAPER = {"reps": 1000, "arl0": 1000, "cap": 25_000, "m": 1000}


def _scale(args, name: str) -> int:
    value = getattr(args, name)
    if value is not None:
        return value
    return (_PAPER if getattr(args, "paper_scale", False) else _DESK)[name]


def _write_output(payload: bytes, path: str | None) -> None:
    if path is None or path == "-":
        sys.stdout.write(payload.decode())
    else:
        Path(path).write_bytes(payload)


def _int_list(text: str) -> list[int]:
    return [int(tok) for tok in text.split(",") if tok.strip()]


def _float_list(text: str) -> list[float]:
    return [float(tok) for tok in text.split(",") if tok.strip()]


def _str_list(text: str) -> list[str]:
    return [tok.strip() for tok in text.split(",") if tok.strip()]


def _add_common_plan_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--b1", type=int, default=100, help="outer bootstrap resamples (default 100)")
    sub.add_argument("--b2", type=int, default=5, help="inner draws per resample, in units of ARL0 (default 5)")
    sub.add_argument("--m-star", type=int, default=None, help="profiles reserved for bootstrap moments (default m//2)")
    sub.add_argument("--inner-size", type=int, default=None, help="profiles per synthetic resample (default m)")


def _cmd_snr_table(args) -> int:
    grid = MonitorGrid.equispaced(args.n)
    table = snr_table(args.xi, grid, noise_sd=args.noise_sd, decimals=args.decimals)
    lines = ["xi," + ",".join(f"site_{j + 1}" for j in range(grid.n_sites))]
    for xi, row in zip(args.xi, table):
        lines.append(f"{xi:g}," + ",".join(f"{v:.{args.decimals}f}" for v in row))
    _write_output(("\n".join(lines) + "\n").encode(), args.output)
    return 0


def _cmd_runlength_verify(args) -> int:
    table = runlength_verify(args.distributions, args.m, args.arl0, args.reps, seed=args.seed)
    _write_output(table.to_csv().encode(), args.output)
    return 0


def _cmd_calibrate(args) -> int:
    hist = load_profiles_csv(args.historical)
    m = hist.shape[0]
    arl0 = _scale(args, "arl0")
    m_star = args.m_star if args.m_star is not None else m // 2
    plan = BootstrapPlan(m_star=m_star, b1=args.b1, b2=args.b2, arl0=arl0, inner_size=args.inner_size)
    rng = np.random.default_rng(args.seed)
    _, chart = bootstrap_calibrate(hist, plan, args.rule, rng)
    report = calibration_report(m, plan, args.rule, chart)
    _write_output((json.dumps(report, indent=2) + "\n").encode(), args.output)
    return 0


def _build_simulate_config(args) -> ExperimentConfig:
    if args.config is not None:
        config = load_config(args.config)
        if args.seed is not None:
            config = ExperimentConfig(**{**_config_kwargs(config), "seed": args.seed})
        return config
    if args.study is None:
        raise ProfmonError("simulate needs either --config FILE or --study N (with --xi)")
    in_spec, out_spec, grid = simulation_study(args.study, args.xi)
    m = _scale(args, "m")
    arl0 = _scale(args, "arl0")
    m_star = args.m_star if args.m_star is not None else m // 2
    plan = BootstrapPlan(m_star=m_star, b1=args.b1, b2=args.b2, arl0=arl0, inner_size=args.inner_size)
    return ExperimentConfig(
        scenario=Scenario(in_control=in_spec, out_of_control=out_spec),
        grid=grid,
        m=m,
        arl0=arl0,
        plan=plan,
        rules=tuple(args.rules),
        reps=_scale(args, "reps"),
        cap=_scale(args, "cap"),
        changepoint=args.changepoint,
        seed=args.seed if args.seed is not None else 0,
        charts=tuple(args.charts),
    )


def _config_kwargs(config: ExperimentConfig) -> dict:
    return {f: getattr(config, f) for f in config.__dataclass_fields__}


def _cmd_simulate(args) -> int:
    config = _build_simulate_config(args)
    report = run_scenario(config, jobs=args.jobs)
    _write_output(emit_report(report, format=args.format), args.output)
    return 0


def _cmd_monitor_csv(args) -> int:
    hist = load_profiles_csv(args.historical)
    arl0 = _scale(args, "arl0")
    m_star = args.m_star if args.m_star is not None else hist.shape[0] // 2
    plan = BootstrapPlan(m_star=m_star, b1=args.b1, b2=args.b2, arl0=arl0, inner_size=args.inner_size)
    config = CsvMonitorConfig(
        arl0=arl0,
        plan=plan,
        rules=tuple(args.rules),
        reps=_scale(args, "reps"),
        cap=_scale(args, "cap"),
        changepoint=args.changepoint,
        seed=args.seed if args.seed is not None else 0,
    )
    report = monitor_csv(args.historical, args.online, config)
    _write_output(emit_report(report, format=args.format), args.output)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="profmon", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--version", action="version", version=f"profmon {__version__}")
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("snr-table", help="shift-to-noise table on the sine monitor grid")
    p.add_argument("--xi", type=_float_list, default=[0.1, 0.2, 0.3, 0.4, 0.5], help="comma-separated shift sizes")
    p.add_argument("--n", type=int, default=10, help="number of monitor sites (default 10)")
    p.add_argument("--noise-sd", type=float, default=0.1)
    p.add_argument("--decimals", type=int, default=2)
    p.add_argument("-o", "--output", default=None, help="output path (default stdout)")
    p.set_defaults(func=_cmd_snr_table)

    p = subs.add_parser("runlength-verify", help="distribution-free ARL verification table")
    p.add_argument(
        "--distributions",
        type=_str_list,
        default=["normal", "t2", "cauchy", "chisq2", "beta_1_10"],
        help="comma-separated score distributions",
    )
    p.add_argument("--m", type=_int_list, default=[200, 400, 1000, 2000], help="reference sizes, multiples of arl0")
    p.add_argument("--arl0", type=int, default=200)
    p.add_argument("--reps", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", default=None)
    p.set_defaults(func=_cmd_runlength_verify)

    p = subs.add_parser("calibrate", help="bootstrap-calibrate a chart limit from a historical CSV")
    p.add_argument("--historical", required=True, help="CSV of historical profiles")
    p.add_argument("--arl0", type=int, default=None, help="target in-control ARL (desk default 200)")
    p.add_argument("--rule", default="minimum", help="aggregation rule (minimum or geometric_mean)")
    _add_common_plan_flags(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--paper-scale", action="store_true", help="use the full-size study settings")
    p.add_argument("-o", "--output", default=None)
    p.set_defaults(func=_cmd_calibrate)

    p = subs.add_parser("simulate", help="replicated FAR/ARL1 study")
    p.add_argument("--config", default=None, help="JSON or TOML experiment config")
    p.add_argument("--study", type=int, choices=(1, 2, 3), default=None, help="canned simulation study")
    p.add_argument("--xi", type=float, default=0.0, help="shift size of the canned study")
    p.add_argument("--rules", type=_str_list, default=["minimum", "geometric_mean"])
    p.add_argument("--charts", type=_str_list, default=["pvalue"], help="subset of pvalue,t2,pca")
    p.add_argument("--m", type=int, default=None, help="historical profiles per replication")
    p.add_argument("--arl0", type=int, default=None)
    p.add_argument("--reps", type=int, default=None)
    p.add_argument("--cap", type=int, default=None)
    p.add_argument("--changepoint", type=int, default=0)
    _add_common_plan_flags(p)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--jobs", type=int, default=1, help="worker processes (default 1)")
    p.add_argument("--paper-scale", action="store_true", help="use the full-size study settings")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("-o", "--output", default=None)
    p.set_defaults(func=_cmd_simulate)

    p = subs.add_parser("monitor-csv", help="calibrate on one CSV pool and monitor permutations of another")
    p.add_argument("--historical", required=True)
    p.add_argument("--online", required=True)
    p.add_argument("--arl0", type=int, default=None)
    p.add_argument("--rules", type=_str_list, default=["minimum"])
    p.add_argument("--reps", type=int, default=None)
    p.add_argument("--cap", type=int, default=None)
    p.add_argument("--changepoint", type=int, default=0)
    _add_common_plan_flags(p)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--paper-scale", action="store_true", help="use the full-size study settings")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("-o", "--output", default=None)
    p.set_defaults(func=_cmd_monitor_csv)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ProfmonError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
