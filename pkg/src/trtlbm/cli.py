"""Command-line entry point: ``trtlbm <subcommand> --config FILE --out DIR``."""
from __future__ import annotations

import argparse
import sys

from . import experiments as ex
from .config import ConfigError, ExperimentConfig
from .kernel import NonFiniteError

EXIT_OK, EXIT_CONFIG, EXIT_BLOWUP = 0, 2, 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="trtlbm", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in (
        ("check", "monotonicity verdict and closed-form bounds"),
        ("run", "single simulation with snapshots and time series"),
        ("convergence", "error and order table over a dx ladder"),
        ("region", "raster of the monotonicity region"),
        ("eqdist", "distance-to-equilibrium traces"),
        ("maxprinciple", "maximum-principle scan along a relaxation line"),
    ):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", required=True, help="flat key = value config file")
        p.add_argument("--out", default=None, help="output directory (default: output.dir)")
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("--oracle-refine", type=int, default=None, help="Godunov refinement factor r")
        p.add_argument("--quick", action="store_true", help="reduced ladders and resolutions")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = ExperimentConfig.from_file(args.config)
        if args.oracle_refine is not None:
            cfg.set("run.oracle_refine", args.oracle_refine)
        out = args.out or cfg.string("output.dir")
        if args.command == "check":
            ex.cmd_check(cfg, out)
        elif args.command == "run":
            report = ex.cmd_run(cfg, out, args.oracle_refine)
            if report.blew_up:
                return EXIT_BLOWUP
        elif args.command == "convergence":
            ex.cmd_convergence(cfg, out, args.threads, args.oracle_refine, args.quick)
        elif args.command == "region":
            ex.cmd_region(cfg, out, args.quick)
        elif args.command == "eqdist":
            ex.cmd_eqdist(cfg, out, args.threads, args.quick)
        elif args.command == "maxprinciple":
            ex.cmd_maxprinciple(cfg, out, args.threads, args.quick)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NonFiniteError as exc:
        print(f"blow-up: {exc}", file=sys.stderr)
        return EXIT_BLOWUP
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
