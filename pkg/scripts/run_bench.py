"""Inverse-power benchmark: median exponent n' against eps, with the fitted c in n' <= c / eps^d.

    python scripts/run_bench.py --out bench.csv
"""
import argparse
import sys

from exactgate.cli import main as cli_main


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--eps-grid", nargs="*", default=["0.3", "0.1", "0.03", "0.01"])
    ap.add_argument("--seeds", default="20")
    ap.add_argument("--dim", default="2")
    ap.add_argument("--out", default="bench.csv")
    ap.add_argument("--report", default="bench_report.json")
    args = ap.parse_args()
    return cli_main(["bench", "--eps-grid", *args.eps_grid, "--seeds", args.seeds, "--dim", args.dim,
                     "--out", args.out, "--report", args.report])


if __name__ == "__main__":
    sys.exit(main())
