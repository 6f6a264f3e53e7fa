#!/usr/bin/env python3
"""BER vs transmit SNR for all precoding schemes.

Desk-scale defaults finish in minutes; --full switches to the 12-user,
200-symbol, 5000-channel configuration (hours of compute).
"""

import argparse
import sys

from slpsim.cli import main as cli_main


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--full", action="store_true",
                        help="12x12 system, M=200, 5000 channels")
    parser.add_argument("--mod", type=int, default=16)
    parser.add_argument("--snr-db", default="0:5:40")
    parser.add_argument("--channels", type=int, default=None)
    parser.add_argument("--seed", type=int, default=1)
    parser.add_argument("--out", default="ber_sweep.csv")
    args = parser.parse_args()

    if args.full:
        users, antennas, block_len, channels = 12, 12, 200, 5000
    else:
        users, antennas, block_len, channels = 4, 4, 50, 500
    if args.channels is not None:
        channels = args.channels

    return cli_main([
        "run", "--experiment", "BER_SWEEP",
        "--users", str(users), "--antennas", str(antennas),
        "--block-len", str(block_len), "--mod", str(args.mod),
        "--snr-db", args.snr_db, "--channels", str(channels),
        "--seed", str(args.seed), "--out", args.out,
    ])


if __name__ == "__main__":
    sys.exit(main())
