"""Command-line entry point: ``tailcs sweep|timing|rip|trace --config PATH``."""
from __future__ import annotations

import argparse
import json
import logging
import sys

from . import bench

COMMAND_KINDS = {
    "sweep": ("sweep_k", "sweep_m", "noisy_sweep"),
    "timing": ("timing",),
    "rip": ("rip_curve",),
    "trace": ("convergence_trace",),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tailcs", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMAND_KINDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON experiment config")
        p.add_argument("--seed", type=int, default=None, help="override the master seed")
        p.add_argument("--out", default="results", help="output directory")
        p.add_argument("--jobs", type=int, default=1, help="worker processes")
        p.add_argument("--dump-solutions", action="store_true",
                       help="also write every recovered vector to solutions.npz")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = bench.ExperimentConfig.load(args.config)
        if args.seed is not None:
            cfg = cfg.replace(seed=args.seed)
        if cfg.kind not in COMMAND_KINDS[args.command]:
            raise bench.ConfigError(
                f"config kind {cfg.kind!r} does not match command {args.command!r}")
    except (OSError, json.JSONDecodeError, bench.ConfigError, TypeError) as exc:
        print(f"tailcs: error: {exc}", file=sys.stderr)
        return 2

    if args.command == "sweep":
        _, summary = bench.run_sweep(cfg, args.out, args.jobs, args.dump_solutions)
        for g, point in summary.items():
            rates = ", ".join(f"{name}={s['success_rate']:.2f}"
                              for name, s in point["solvers"].items())
            print(f"[{g}] n={point['n']} m={point['m']} k={point['k']}: {rates}")
    elif args.command == "timing":
        for row in bench.run_timing(cfg, args.out, args.jobs):
            print(f"n={row['n']} {row['solver']:>10s}: {row['mean_time_s']:.4f} s "
                  f"(success {row['success_rate']:.2f})")
    elif args.command == "rip":
        for row in bench.run_rip_curve(cfg, args.out):
            print(f"k={row['k']:3d} delta_l={row['delta_l']:.4f} delta_u={row['delta_u']:.4f} "
                  f"[{row['method']}]")
    else:
        _, report = bench.run_convergence_trace(cfg, args.out)
        print(json.dumps(report, indent=2))
    return 0


if __name__ == "__main__":
    sys.exit(main())
