"""Command-line entry points for training and evaluation.

    vamp-cfar-train train    --config train.toml --out learned.json
    vamp-cfar-train evaluate --config train.toml --params learned.json

Exit codes: 0 success, 2 config error, 3 training failure (divergent
loss or degenerate forward pass).
"""

from __future__ import annotations

import argparse
import sys

from .config import TrainerConfigError, load_config
from .model import TrainingDegenerateError, UnfoldedVampNet, load_params_file
from .train import evaluate, train, validation_seed


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="vamp-cfar-train",
        description="Learn unfolded-VAMP layer parameters on synthetic data",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train and export a parameter file")
    p_train.add_argument("--config", required=True)
    p_train.add_argument("--out", required=True, help="output parameter file")

    p_eval = sub.add_parser("evaluate",
                            help="held-out NMSE of a parameter file (no training)")
    p_eval.add_argument("--config", required=True)
    p_eval.add_argument("--params", required=True)
    args = parser.parse_args(argv)

    try:
        cfg = load_config(args.config)
        if args.command == "evaluate":
            params = load_params_file(args.params)
    except (TrainerConfigError, ValueError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    try:
        if args.command == "train":
            result = train(cfg, out_path=args.out)
            print(f"init val NMSE {result.init_val_nmse:.6g}; "
                  f"best val NMSE {result.best_val_nmse:.6g} "
                  f"(step {result.best_step}); wrote {args.out}")
        else:
            net = UnfoldedVampNet.from_params(params)
            val = evaluate(cfg, net, validation_seed(cfg),
                           batch_size=cfg.val_batch_size)
            print(f"val NMSE {val:.6g}")
    except (TrainingDegenerateError, FloatingPointError) as exc:
        print(f"training failure: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
