"""Command line entry point: ``gyrovlasov <subcommand> [options]``.

Exit codes: 0 success, 1 verification or run failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import harness, storage
from .config import ConfigError, RunConfig, load_config, preset
from .core import FrameMismatchError
from .diagnostics import relative_drift
from .kernel import KernelDomainError
from .limit_model import StepFailure

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def _eps_list(text: str):
    try:
        return tuple(float(p) for p in text.split(",") if p.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}")


def _config(args) -> RunConfig:
    if args.config and args.preset:
        raise ConfigError("give either --config or --preset, not both")
    if args.config:
        cfg = load_config(args.config)
    elif args.preset:
        cfg = preset(args.preset)
    else:
        raise ConfigError("a run needs --config PATH or --preset NAME")
    if getattr(args, "eps", None) is not None:
        cfg = replace(cfg, eps_list=args.eps)
    if args.out is not None:
        cfg = replace(cfg, output_dir=Path(args.out))
    return cfg


def _report_drift(drift: dict, quiet: bool) -> None:
    if quiet:
        return
    for k, v in drift.items():
        print(f"  drift {k:7s} {v:.3e}")


def _cmd_run(args, full: bool) -> int:
    cfg = _config(args)
    run = harness.run_full if full else harness.run_limit
    result = run(cfg, cfg.output_dir)
    if not args.quiet:
        n = len(result.record)
        print(f"wrote {n} snapshots and diag.csv to {cfg.output_dir}")
    _report_drift(result.drift, args.quiet)
    if args.tol is not None:
        worst = max(result.drift.values())
        if worst > args.tol:
            print(f"largest relative drift {worst:.3e} exceeds --tol {args.tol:g}", file=sys.stderr)
            return EXIT_FAIL
    return EXIT_OK


def _cmd_compare(args) -> int:
    cfg = _config(args)
    res = harness.compare_eps(cfg, sup=args.sup)
    rows = list(zip(res.eps, res.errors))
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    storage.write_table(cfg.output_dir / "compare.csv", ("eps", "trajectory_error"), rows)
    if not args.quiet:
        print(f"{'eps':>10s}  trajectory_error")
        for eps, err in rows:
            print(f"{eps:10.5g}  {err:.6e}")
    if not res.strictly_decreasing:
        print("trajectory_error does not decrease strictly with eps", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def _cmd_verify_kernel(args) -> int:
    if args.n_samples == 0:
        print("warning: n_samples = 0, nothing to verify", file=sys.stderr)
    check = harness.verify_kernel(args.n_samples, args.n_nodes, args.margin,
                                  relative=args.margin_kind == "relative", seed=args.seed)
    tol = 1e-9 if args.tol is None else args.tol
    if not args.quiet:
        print(f"samples {check.n_samples}  nodes {args.n_nodes}  "
              f"max error {check.max_error:.3e}  mean error {check.mean_error:.3e}  tol {tol:g}")
    if check.n_samples and not check.max_error <= tol:
        return EXIT_FAIL
    return EXIT_OK


def _cmd_diagnose(args) -> int:
    if args.out is None:
        raise ConfigError("diagnose needs --out DIR pointing at a run directory")
    path = Path(args.out) / "diag.csv"
    try:
        rows = storage.read_diag(path)
    except FileNotFoundError:
        raise ConfigError(f"no diag.csv in {args.out}") from None
    if not rows:
        raise ConfigError(f"{path} has no rows")
    drift = relative_drift(rows)
    if not args.quiet:
        print(f"{len(rows)} rows, t = {rows[0]['t']:g} .. {rows[-1]['t']:g}")
    _report_drift(drift, args.quiet)
    if args.tol is not None and max(drift.values()) > args.tol:
        return EXIT_FAIL
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="sectioned key = value run configuration")
    common.add_argument("--preset", help="built-in configuration: two_vortex, gaussian_bump, compare")
    common.add_argument("--out", help="output directory (overrides [run] output_dir)")
    common.add_argument("--tol", type=float, help="failure threshold for the subcommand's check")
    common.add_argument("--quiet", action="store_true", help="print errors only")

    parser = argparse.ArgumentParser(prog="gyrovlasov",
                                     description="Gyro-averaged Vlasov-Poisson particle simulator")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("run-limit", parents=[common], help="integrate the limit model")
    sub.add_parser("run-full", parents=[common], help="integrate the epsilon model")
    cmp_ = sub.add_parser("compare", parents=[common],
                          help="epsilon sweep of filtered full-model runs against the limit model")
    cmp_.add_argument("--eps", type=_eps_list, help="strictly decreasing list, e.g. 0.1,0.05,0.025")
    cmp_.add_argument("--sup", action="store_true", help="largest marker distance instead of RMS")
    vk = sub.add_parser("verify-kernel", parents=[common],
                        help="closed-form kernel against circle-average quadrature")
    vk.add_argument("--n-samples", type=int, default=1000)
    vk.add_argument("--n-nodes", type=int, default=512)
    vk.add_argument("--margin", type=float, default=0.05,
                    help="minimum gap between |xi| and |eta|/|omega_c|")
    vk.add_argument("--margin-kind", choices=("relative", "absolute"), default="relative")
    vk.add_argument("--seed", type=int, default=0)
    sub.add_parser("diagnose", parents=[common], help="drift summary of a run's diag.csv")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(message)s")
    handlers = {
        "run-limit": lambda: _cmd_run(args, full=False),
        "run-full": lambda: _cmd_run(args, full=True),
        "compare": lambda: _cmd_compare(args),
        "verify-kernel": lambda: _cmd_verify_kernel(args),
        "diagnose": lambda: _cmd_diagnose(args),
    }
    try:
        return handlers[args.command]()
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (StepFailure, KernelDomainError, FrameMismatchError, OSError) as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
