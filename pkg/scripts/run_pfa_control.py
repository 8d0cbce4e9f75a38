#!/usr/bin/env python3
"""Run the pfa-control experiment with the packaged detection config."""

import argparse
import sys
from pathlib import Path

from vamp_cfar.cli import main as cli_main

DEFAULT_CONFIG = Path(__file__).resolve().parent / "configs" / "detection.toml"


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--config", default=str(DEFAULT_CONFIG))
    parser.add_argument("--out", default="results/pfa_control")
    parser.add_argument("--workers", type=int, default=4)
    parser.add_argument("--params", default=None, help="learned-parameter file")
    args = parser.parse_args()
    argv = ["pfa-control", "--config", args.config, "--out", args.out,
            "--workers", str(args.workers)]
    if args.params:
        argv += ["--params", args.params]
    return cli_main(argv)


if __name__ == "__main__":
    sys.exit(main())
