"""Command-line interface.

Subcommands: gen-data, pretrain, probe, ablate, export-embeddings. Each run
resolves its configuration from an optional INI file plus ``--set
section.key=value`` overrides and writes the resolved config next to its
outputs. Exit codes: 0 success, 1 contract violation, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import sys

from .config import load_config
from .errors import ContractViolationError, NumericalFailureError
from .runner import (
    export_embeddings,
    run_ablate_command,
    run_gen_data_command,
    run_pretrain_command,
    run_probe_command,
)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="levelcl",
        description="Multi-level contrastive pretraining on synthetic lesion patches",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", "-c", default=None, help="INI config file")
        p.add_argument("--set", dest="overrides", action="append", default=[],
                       metavar="SECTION.KEY=VALUE", help="override a config key")
        p.add_argument("--out", default=None, help="output directory (default from config)")

    p = sub.add_parser("gen-data", help="write the synthetic dataset as PGM + manifest")
    common(p)

    p = sub.add_parser("pretrain", help="run contrastive pretraining, write checkpoint")
    common(p)

    p = sub.add_parser("probe", help="train and evaluate a probe on a checkpoint")
    common(p)
    p.add_argument("--checkpoint", required=True, help="encoder checkpoint file")

    p = sub.add_parser("ablate", help="run the ablation grid over variants and seeds")
    common(p)
    p.add_argument("--seeds", default="11,12,13",
                   help="comma-separated pretraining seeds (>= 3)")

    p = sub.add_parser("export-embeddings", help="dump patch embeddings to CSV")
    common(p)
    p.add_argument("--checkpoint", required=True, help="encoder checkpoint file")
    p.add_argument("--split", choices=("train", "eval"), default="eval")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config, args.overrides)
        out_dir = args.out or config.out_dir
        if args.command == "gen-data":
            manifest = run_gen_data_command(config, out_dir)
            print(f"dataset written: {manifest}")
        elif args.command == "pretrain":
            paths = run_pretrain_command(config, out_dir)
            print(f"checkpoint written: {paths['checkpoint']}")
            print(f"trace written: {paths['trace']}")
        elif args.command == "probe":
            paths = run_probe_command(config, args.checkpoint, out_dir)
            print(f"metrics written: {paths['metrics']}")
        elif args.command == "ablate":
            seeds = [int(s) for s in args.seeds.split(",") if s.strip()]
            paths = run_ablate_command(config, seeds, out_dir)
            print(f"ablation table written: {paths['ablation']}")
        elif args.command == "export-embeddings":
            out_path = args.out or f"{config.out_dir}/embeddings.csv"
            path = export_embeddings(config, args.checkpoint, out_path, split=args.split)
            print(f"embeddings written: {path}")
    except ContractViolationError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except NumericalFailureError as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
