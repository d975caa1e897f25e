"""Monotonicity rasters, maximum-principle scans, eq-dist traces and the D2Q5 run.

    python3 scripts/sweeps.py [region|maxprinciple|eqdist|d2q5|all] [--quick]
"""
import argparse
from pathlib import Path

from trtlbm.cli import main

ROOT = Path(__file__).resolve().parent.parent
JOBS = {
    "region": [("region", "region_1225"), ("region", "region_13")],
    "maxprinciple": [("maxprinciple", "maxprinciple_magic"), ("maxprinciple", "maxprinciple_bgk")],
    "eqdist": [("eqdist", "eqdist")],
    "d2q5": [("check", "d2q5_radial"), ("run", "d2q5_radial")],
}


def cli():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("which", nargs="?", default="all", choices=sorted(JOBS) + ["all"])
    p.add_argument("--quick", action="store_true")
    p.add_argument("--threads", type=int, default=4)
    p.add_argument("--out", default="out")
    args = p.parse_args()
    names = sorted(JOBS) if args.which == "all" else [args.which]
    status = 0
    for key in names:
        for command, cfg in JOBS[key]:
            print(f"== {command} {cfg}")
            argv = [command, "--config", str(ROOT / "configs" / f"{cfg}.cfg"), "--out", f"{args.out}/{cfg}"]
            if command in ("eqdist", "maxprinciple"):
                argv += ["--threads", str(args.threads)]
            if args.quick and command != "check" and command != "run":
                argv.append("--quick")
            status |= main(argv)
    return status


if __name__ == "__main__":
    raise SystemExit(cli())
