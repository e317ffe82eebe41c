"""Command-line entry point for reproducible experiment runs.

Stages run independently and cache their outputs in the run directory:

    gestar gen-data --out runs/a --seed 7
    gestar train    --out runs/a --seed 7
    gestar adapt    --out runs/a --seed 7
    gestar evaluate --out runs/a --seed 7
    gestar report   --out runs/a

Exit codes: 0 success, 2 config or input error, 3 I/O failure, 4 numeric
failure during training.
"""

from __future__ import annotations

import argparse
import sys

from .comparison import format_table
from .errors import ConfigError, NumericError, ParameterError, ValidationError
from .experiment import (
    ExperimentConfig,
    stage_adapt,
    stage_evaluate,
    stage_gen_data,
    stage_report,
    stage_train,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_NUMERIC = 4


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=str, default=None, help="TOML experiment config")
    parser.add_argument("--seed", type=int, default=None, help="master seed override")
    parser.add_argument("--out", type=str, default=None, help="run directory override")
    parser.add_argument("--threads", type=int, default=None, help="worker thread bound")
    parser.add_argument(
        "--scale", choices=("desk", "paper"), default=None, help="preset scale when no config file is given"
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gestar", description=__doc__.strip().splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate the synthetic dataset")
    _add_common(p)
    p.add_argument("--dump-csv", action="store_true", help="also emit accel/emg CSV dumps")

    p = sub.add_parser("train", help="federated training of all comparison recognizers")
    _add_common(p)
    p.add_argument("--rounds", type=int, default=None, help="override round budget")
    p.add_argument("--resume", action="store_true", help="continue from the last checkpoints")

    p = sub.add_parser("adapt", help="train interface adaptation policies")
    _add_common(p)
    p.add_argument("--episodes", type=int, default=None, help="override episode budget")

    p = sub.add_parser("evaluate", help="run the comparison harness")
    _add_common(p)
    p.add_argument("--json-only", action="store_true", help="write metrics.json but no CSV table")

    p = sub.add_parser("report", help="verify manifests and print the result table")
    _add_common(p)
    return parser


def load_config(args: argparse.Namespace) -> ExperimentConfig:
    if args.config is not None:
        config = ExperimentConfig.from_toml(args.config)
        if args.scale is not None and args.scale != config.scale:
            raise ConfigError("--scale conflicts with the scale set in the config file")
    else:
        config = ExperimentConfig.default(scale=args.scale or "desk")
    return config.with_overrides(seed=args.seed, out_dir=args.out, threads=args.threads)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "report":
            out_dir = args.out
            if out_dir is None and args.config is not None:
                out_dir = ExperimentConfig.from_toml(args.config).out_dir
            if out_dir is None:
                raise ConfigError("report needs --out or --config")
            print(stage_report(out_dir))
            return EXIT_OK

        config = load_config(args)
        if args.command == "gen-data":
            if args.dump_csv:
                d = config.to_dict()
                d["dump_csv"] = True
                config = ExperimentConfig.from_dict(d)
            data_dir = stage_gen_data(config)
            print(f"dataset written to {data_dir}")
        elif args.command == "train":
            results = stage_train(
                config, rounds_override=args.rounds, resume=args.resume, threads=args.threads
            )
            for row, result in results.items():
                print(
                    f"{row}: rounds {len(result.history)}, best val F1 "
                    f"{result.best_val_f1:.4f} at round {result.best_round}"
                )
        elif args.command == "adapt":
            policies = stage_adapt(config, episodes_override=args.episodes)
            print(f"trained {len(policies)} policies -> {config.out_dir}/adapt")
        elif args.command == "evaluate":
            reports = stage_evaluate(config, json_only=args.json_only)
            print(format_table(reports))
        else:  # pragma: no cover - argparse guards this
            raise ConfigError(f"unknown command {args.command!r}")
        return EXIT_OK
    except (ConfigError, ValidationError, ParameterError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"i/o failure: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
