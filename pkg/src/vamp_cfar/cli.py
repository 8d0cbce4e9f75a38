"""Command-line entry points for the Monte-Carlo experiments.

Subcommands mirror the three experiment kinds plus a fixture exporter
for external reimplementations:

    vamp-cfar sigma-convergence --config cfg.toml --out results/
    vamp-cfar roc               --config cfg.toml --out results/ --workers 4
    vamp-cfar pfa-control       --config cfg.json --out results/
    vamp-cfar export-fixtures   --config cfg.toml --out fixtures/ --count 8

Exit codes: 0 success, 2 config or parameter-file error, 3 numeric
failure inside the recovery engine.
"""

from __future__ import annotations

import argparse
import sys

from .errors import ConfigError, NumericFailureError, ParameterSchemaError
from .experiments import (
    build_model,
    export_fixtures,
    load_config,
    run_pfa_control,
    run_roc,
    run_sigma_convergence,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3

_RUNNERS = {
    "sigma-convergence": run_sigma_convergence,
    "roc": run_roc,
    "pfa-control": run_pfa_control,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vamp-cfar",
        description="Sub-Nyquist radar CFAR detection experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", required=True,
                       help="TOML or JSON experiment config")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--params", default=None,
                       help="learned-parameter file overriding the config's mode")

    for name, help_text in (
        ("sigma-convergence", "variance-estimate convergence and ECDFs"),
        ("roc", "detection-rate vs false-alarm-rate sweep"),
        ("pfa-control", "empirical vs nominal false-alarm rate"),
    ):
        p = sub.add_parser(name, help=help_text)
        add_common(p)
        p.add_argument("--workers", type=int, default=1,
                       help="worker processes over trials (default 1)")

    p = sub.add_parser("export-fixtures",
                       help="write reference generation/recovery batches")
    add_common(p)
    p.add_argument("--count", type=int, default=None,
                   help="number of samples (default: config trials)")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        model = build_model(cfg, params_path=args.params)
    except (ConfigError, ParameterSchemaError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        if args.command == "export-fixtures":
            export_fixtures(cfg, args.out, count=args.count, model=model)
        else:
            runner = _RUNNERS[args.command]
            runner(cfg, out_dir=args.out, workers=args.workers, model=model)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericFailureError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
