"""Command line entry point: ``scaledgp {bench,autoparam,simulate,groundtruth}``.

Exit codes: 0 success, 2 any solver failure, 3 configuration error.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .config import ConfigError, load_config
from . import runner

EXIT_OK = 0
EXIT_SOLVER = 2
EXIT_CONFIG = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="scaledgp", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("bench", "compare solver variants against a ground-truth minimizer"),
        ("autoparam", "choose nu by the discrepancy principle for each method"),
        ("simulate", "write the simulated data, object and PSF images"),
        ("groundtruth", "compute (or load from cache) the reference minimizer"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="key = value configuration file")
        p.add_argument("--seed", type=int, help="problem seed (overrides problem.seed)")
        p.add_argument("--out", help="output directory (overrides output.dir)")
        p.add_argument("--method", action="append", help="solver variant; repeatable (overrides solver.methods)")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            if args.seed < 0:
                raise ConfigError("--seed must be nonnegative")
            cfg["problem.seed"] = args.seed
        if args.out:
            cfg["output.dir"] = args.out
        if args.method:
            cfg["solver.methods"] = ",".join(args.method)
        if args.command != "simulate":
            runner.validate(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        if args.command == "bench":
            results, gt = runner.run_benchmark(cfg)
            for r in results:
                print(f"{r.method:12s} {r.status:8s} iters_to_gap={r.iters_to_gap} "
                      f"final_rel_gap={r.final_rel_gap:.3e} rel_error={r.rel_error:.4f}")
            failed = any(r.status == "failed" for r in results)
        elif args.command == "autoparam":
            results = runner.run_autoparam(cfg)
            for r in results:
                res = r.result
                if res is None:
                    print(f"{r.method:12s} {r.status}: {r.reason}")
                else:
                    print(f"{r.method:12s} {r.status:13s} k={res.steps} k_tot={res.total_inner_iterations} "
                          f"nu={res.nu:.4e} D={res.discrepancy:.5f} err={r.rel_error:.4f}")
            failed = any(r.status == "failed" for r in results)
        elif args.command == "simulate":
            model, _ = runner.run_simulate(cfg)
            print(f"wrote {model.shape[0]}x{model.shape[1]} data to {cfg['output.dir']}")
            failed = False
        else:
            gt = runner.run_groundtruth(cfg)
            print(f"ground truth {gt.key}: f = {gt.f!r} after {gt.iterations} iterations")
            failed = False
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:
        print(f"solver failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_SOLVER if failed else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
