"""Command-line entry points.

    acdisk run --config golden.cfg --out out/golden
    acdisk sweep --config sweep.cfg --eps 0.08,0.04,0.02 --out out/sweep
    acdisk kernel-check --n 2 --samples 100 --seed 7
    acdisk selftest

Exit codes: 0 pass, 1 check failure, 2 config error, 3 numerical abort.
AC_THREADS caps sweep parallelism (runs members in separate processes).
"""

from __future__ import annotations

import argparse
import sys

from .harness import (ConfigError, EXIT_CHECK, EXIT_CONFIG, EXIT_NUMERIC,
                      EXIT_OK, kernel_selftest, library_selftest, load_config,
                      run_experiment, run_sweep)


def _cmd_run(args) -> int:
    try:
        config = load_config(args.config)
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    result = run_experiment(config, args.out)
    for check in result.checks:
        status = "PASS" if check.passed else "FAIL"
        print(f"{check.name}: {check.value:.6g} ({check.threshold}) {status}")
    if result.exit_code == EXIT_NUMERIC:
        print("numerical abort; see report.txt", file=sys.stderr)
    return result.exit_code


def _cmd_sweep(args) -> int:
    try:
        config = load_config(args.config)
        eps_list = [float(part) for part in args.eps.split(",") if part.strip()]
    except (ConfigError, OSError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        out = run_sweep(config, eps_list, args.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    for check in out.get("checks", []):
        status = "PASS" if check.passed else "FAIL"
        print(f"{check.name}: {check.value:.6g} ({check.threshold}) {status}")
    return out["exit_code"]


def _cmd_kernel_check(args) -> int:
    try:
        out = kernel_selftest(args.n, args.samples, args.seed)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"standard identity (n={out['n']}, {out['samples']} samples): "
          f"worst rel residual {out['worst_standard']:.3e} "
          f"{'PASS' if out['standard_ok'] else 'FAIL'}")
    if "worst_reflected" in out:
        print(f"reflected identity: worst rel residual "
              f"{out['worst_reflected']:.3e} "
              f"{'PASS' if out['reflected_ok'] else 'FAIL'}")
    return out["exit_code"]


def _cmd_selftest(_args) -> int:
    out = library_selftest()
    for line in out["lines"]:
        print(line)
    return out["exit_code"]


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="acdisk", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one experiment from a config file")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--out", required=True)
    p_run.set_defaults(func=_cmd_run)

    p_sweep = sub.add_parser("sweep", help="run an eps sweep of one config")
    p_sweep.add_argument("--config", required=True)
    p_sweep.add_argument("--eps", required=True,
                         help="comma list, strictly decreasing")
    p_sweep.add_argument("--out", required=True)
    p_sweep.set_defaults(func=_cmd_sweep)

    p_kc = sub.add_parser("kernel-check", help="kernel identity self-test")
    p_kc.add_argument("--n", type=int, default=2, choices=(2, 3))
    p_kc.add_argument("--samples", type=int, default=100)
    p_kc.add_argument("--seed", type=int, default=7)
    p_kc.set_defaults(func=_cmd_kernel_check)

    p_st = sub.add_parser("selftest", help="1-D standing wave and invariants")
    p_st.set_defaults(func=_cmd_selftest)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except FloatingPointError as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
