"""Error/order tables for the magic and BGK sweeps on both 1D data.

    python3 scripts/reproduce_tables.py [--quick] [--threads 4] [--out out]
"""
import argparse
from pathlib import Path

from trtlbm.cli import main

CONFIGS = ["table1_indicator", "table1_hat", "table2_indicator", "table2_hat"]
ROOT = Path(__file__).resolve().parent.parent


def cli():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--quick", action="store_true")
    p.add_argument("--threads", type=int, default=4)
    p.add_argument("--out", default="out")
    args = p.parse_args()
    status = 0
    for name in CONFIGS:
        print(f"== {name}")
        argv = ["convergence", "--config", str(ROOT / "configs" / f"{name}.cfg"),
                "--out", f"{args.out}/{name}", "--threads", str(args.threads)]
        status |= main(argv + (["--quick"] if args.quick else []))
    return status


if __name__ == "__main__":
    raise SystemExit(cli())
