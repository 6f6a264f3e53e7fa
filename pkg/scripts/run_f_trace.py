#!/usr/bin/env python3
"""Trace the per-symbol rescaling factor over one block for every scheme.

With in-block power allocation the trace is flat (one broadcast per block);
with uniform power it varies symbol by symbol. Full-size system by default;
the trace needs only M solves per scheme, so this is cheap.
"""

import argparse
import sys

from slpsim.cli import main as cli_main


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--users", type=int, default=12)
    parser.add_argument("--antennas", type=int, default=12)
    parser.add_argument("--block-len", type=int, default=10)
    parser.add_argument("--mod", type=int, default=16)
    parser.add_argument("--snr-db", default="40")
    parser.add_argument("--seed", type=int, default=1)
    parser.add_argument("--out", default="f_trace.csv")
    args = parser.parse_args()
    return cli_main([
        "run", "--experiment", "F_TRACE",
        "--users", str(args.users), "--antennas", str(args.antennas),
        "--block-len", str(args.block_len), "--mod", str(args.mod),
        "--snr-db", args.snr_db, "--seed", str(args.seed), "--out", args.out,
    ])


if __name__ == "__main__":
    sys.exit(main())
