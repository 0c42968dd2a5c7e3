"""Command line entry point: run a suite from a JSON config or emit plot data."""
from __future__ import annotations

import argparse
import json
import logging
import sys

from .experiments import (OUT_ENV, ConfigError, ExperimentConfig, emit_plot_data,
                          read_report_rows, resolve_out_dir, run_suite)

EXIT_PASS, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2

log = logging.getLogger("dyadic_bloom")


def build_parser():
    ap = argparse.ArgumentParser(prog="dyadic_bloom", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run an experiment suite")
    run.add_argument("--config", required=True, help="JSON experiment config")
    run.add_argument("--seed", type=int, default=None, help="override the config seed")
    run.add_argument("--out", default=None, help=f"output directory (default ${OUT_ENV} or ./results)")
    run.add_argument("--threads", type=int, default=1, help="worker threads for trials")
    run.add_argument("-q", "--quiet", action="store_true")
    plot = sub.add_parser("emit-plot", help="long-format CSV (x, y, series) from a report")
    plot.add_argument("--report", required=True, help="report CSV or JSON summary")
    plot.add_argument("--axes", required=True, help="'x,y' or 'x,y,series' column names")
    plot.add_argument("--out", default=None, help="write to this file instead of stdout")
    return ap


def _load_config(path, seed):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"configuration is not valid JSON: {exc}") from None
    if seed is not None and isinstance(d, dict):
        d["seed"] = seed
    return ExperimentConfig.from_dict(d)


def cmd_run(args):
    try:
        cfg = _load_config(args.config, args.seed)
        if args.threads < 1:
            raise ConfigError("--threads must be at least 1")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    report = run_suite(cfg, threads=args.threads)
    out = resolve_out_dir(args.out, cfg)
    try:
        csv_path, json_path = report.write(out)
    except OSError as exc:
        print(f"cannot write report: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if not args.quiet:
        for a in report.assertions:
            print(f"{'PASS' if a.passed else 'FAIL'}  {a.name}: {a.detail}")
        print(f"{cfg.suite} [{cfg.config_hash}] {len(report.rows)} rows in {report.runtime:.1f}s")
        print(f"wrote {csv_path}\nwrote {json_path}")
    return EXIT_PASS if report.passed else EXIT_FAIL


def cmd_emit_plot(args):
    try:
        rows = read_report_rows(args.report)
        text = emit_plot_data(rows, args.axes)
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_PASS


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(message)s")
    if args.command == "run":
        return cmd_run(args)
    return cmd_emit_plot(args)


if __name__ == "__main__":
    sys.exit(main())
