"""Experiment configuration, run manifests, and pipeline stages.

Human-edited configs are TOML; everything machine-written (manifests,
metrics) is JSON. A stage writes its outputs plus a run manifest listing
every produced file with a sha256 digest, so a finished run directory is
self-verifying.
"""

from __future__ import annotations

import json
import sys
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - depends on interpreter
    import tomli as tomllib

from . import __version__
from .adaptui import QTable, RLHyperparams, train_policy
from .checkpoint import file_digest, load_checkpoint
from .comparison import (
    ALL_ROWS,
    RECOGNIZER_ROWS,
    ComparisonConfig,
    build_users,
    measure_user_accuracies,
    model_config_for_row,
    run_comparison,
    write_metrics_json,
    write_table_csv,
)
from .dataio import MANIFEST_NAME, dump_csv, load_dataset, save_dataset
from .errors import ConfigError, ValidationError
from .federated import RoundConfig, RoundReport, TrainingResult, run_training
from .model import GestureModel, ModelConfig
from .rng import derive_seed
from .synthdata import Dataset, DatasetSpec, generate_dataset

DATASET_DIR = "dataset"
TRAIN_DIR = "train"
ADAPT_DIR = "adapt"
EVAL_DIR = "evaluate"


@dataclass
class ExperimentConfig:
    seed: int = 0
    out_dir: str = "runs/exp"
    scale: str = "desk"
    threads: int = 1
    rl_episodes: int = 6000
    dataset: DatasetSpec = field(default_factory=DatasetSpec)
    federated: RoundConfig = field(default_factory=RoundConfig)
    rl: RLHyperparams = field(default_factory=RLHyperparams)
    comparison: ComparisonConfig = field(default_factory=ComparisonConfig)
    dump_csv: bool = False

    @classmethod
    def default(cls, scale: str = "desk", seed: int = 0, out_dir: str = "runs/exp") -> "ExperimentConfig":
        if scale not in ("desk", "paper"):
            raise ConfigError(f"unknown scale {scale!r} (expected 'desk' or 'paper')")
        spec = DatasetSpec.desk(seed=seed) if scale == "desk" else DatasetSpec.paper_scale(seed=seed)
        return cls(seed=seed, out_dir=out_dir, scale=scale, dataset=spec)

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "out_dir": self.out_dir,
            "scale": self.scale,
            "threads": self.threads,
            "rl_episodes": self.rl_episodes,
            "dump_csv": self.dump_csv,
            "dataset": self.dataset.to_dict(),
            "federated": self.federated.to_dict(),
            "rl": self.rl.to_dict(),
            "comparison": {
                "rows": list(self.comparison.rows),
                "eval_episodes_per_user": self.comparison.eval_episodes_per_user,
                "f1_average": self.comparison.f1_average,
                "model": self.comparison.model.to_dict(),
            },
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        try:
            base = cls.default(
                scale=d.get("scale", "desk"),
                seed=int(d.get("seed", 0)),
                out_dir=d.get("out_dir", "runs/exp"),
            )
            dataset_d = base.dataset.to_dict()
            dataset_d.update(d.get("dataset", {}))
            dataset_d.setdefault("seed", base.seed)
            federated_d = RoundConfig().to_dict()
            federated_d.update(d.get("federated", {}))
            rl_d = RLHyperparams().to_dict()
            rl_d.update(d.get("rl", {}))
            comp_in = d.get("comparison", {})
            model_d = ModelConfig().to_dict()
            model_d.update(comp_in.get("model", {}))
            comparison = ComparisonConfig(
                rows=tuple(comp_in.get("rows", ALL_ROWS)),
                eval_episodes_per_user=int(comp_in.get("eval_episodes_per_user", 30)),
                f1_average=comp_in.get("f1_average", "macro"),
                model=ModelConfig.from_dict(model_d),
            )
            return cls(
                seed=base.seed,
                out_dir=base.out_dir,
                scale=base.scale,
                threads=int(d.get("threads", 1)),
                rl_episodes=int(d.get("rl_episodes", 6000)),
                dataset=DatasetSpec.from_dict(dataset_d),
                federated=RoundConfig.from_dict(federated_d),
                rl=RLHyperparams.from_dict(rl_d),
                comparison=comparison,
                dump_csv=bool(d.get("dump_csv", False)),
            )
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"invalid experiment config: {exc}") from exc

    @classmethod
    def from_toml(cls, path: Path | str) -> "ExperimentConfig":
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        try:
            with open(path, "rb") as fh:
                data = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: TOML parse error: {exc}") from exc
        return cls.from_dict(data)

    def with_overrides(self, seed: int | None = None, out_dir: str | None = None, threads: int | None = None) -> "ExperimentConfig":
        d = self.to_dict()
        if seed is not None:
            d["seed"] = int(seed)
            d["dataset"]["seed"] = int(seed)
        if out_dir is not None:
            d["out_dir"] = str(out_dir)
        if threads is not None:
            d["threads"] = int(threads)
        return ExperimentConfig.from_dict(d)


# ---------------------------------------------------------------------------
# run manifests


def _now_iso() -> str:
    return datetime.now(timezone.utc).isoformat()


def write_run_manifest(out_dir: Path, stage: str, config: ExperimentConfig, files: list[Path], started: str) -> Path:
    out_dir = Path(out_dir)
    manifest = {
        "stage": stage,
        "tool_version": __version__,
        "seed": config.seed,
        "config": config.to_dict(),
        "started": started,
        "finished": _now_iso(),
        "files": {
            str(f.relative_to(out_dir)): file_digest(f) for f in sorted(files) if f.exists()
        },
    }
    path = out_dir / f"manifest_{stage}.json"
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def verify_run_manifest(path: Path | str) -> list[str]:
    """Returns a list of problems; empty means every digest matches."""
    path = Path(path)
    with open(path, "r", encoding="utf-8") as fh:
        manifest = json.load(fh)
    problems = []
    base = path.parent
    for rel, digest in manifest.get("files", {}).items():
        target = base / rel
        if not target.exists():
            problems.append(f"missing file: {rel}")
        elif file_digest(target) != digest:
            problems.append(f"digest mismatch: {rel}")
    return problems


# ---------------------------------------------------------------------------
# stages


def stage_gen_data(config: ExperimentConfig) -> Path:
    started = _now_iso()
    out_dir = Path(config.out_dir)
    data_dir = out_dir / DATASET_DIR
    dataset = generate_dataset(config.dataset)
    save_dataset(dataset, data_dir)
    files = [data_dir / MANIFEST_NAME, data_dir / "samples.bin"]
    if config.dump_csv:
        dump_csv(dataset, data_dir)
        files += [data_dir / "accel.csv", data_dir / "emg.csv"]
    write_run_manifest(out_dir, "gen-data", config, files, started)
    return data_dir


def _load_dataset_checked(config: ExperimentConfig) -> Dataset:
    data_dir = Path(config.out_dir) / DATASET_DIR
    if not (data_dir / MANIFEST_NAME).exists():
        raise ConfigError(f"dataset not found under {data_dir}; run gen-data first")
    return load_dataset(data_dir)


def _recognizer_rows(config: ExperimentConfig) -> list[str]:
    rows = [r for r in config.comparison.rows if r in RECOGNIZER_ROWS]
    if "static" in config.comparison.rows and "ours" not in rows:
        rows.insert(0, "ours")
    return rows


def stage_train(
    config: ExperimentConfig,
    rounds_override: int | None = None,
    resume: bool = False,
    threads: int | None = None,
) -> dict[str, TrainingResult]:
    started = _now_iso()
    dataset = _load_dataset_checked(config)
    out_dir = Path(config.out_dir)
    train_dir = out_dir / TRAIN_DIR
    threads = threads if threads is not None else config.threads

    round_cfg = config.federated
    if rounds_override is not None:
        d = round_cfg.to_dict()
        d["rounds"] = int(rounds_override)
        round_cfg = RoundConfig.from_dict(d)

    results = {}
    files: list[Path] = []
    for row in _recognizer_rows(config):
        model_cfg = model_config_for_row(row, config.comparison.model)
        master_seed = derive_seed(config.seed, "train", row)
        initial_vector = None
        start_round = 0
        prior: list[RoundReport] = []
        if resume:
            last = train_dir / f"{row}_last.bin"
            hist = train_dir / f"{row}_history.jsonl"
            if not last.exists():
                raise ConfigError(f"cannot resume row {row!r}: {last} missing")
            initial_vector, _ = load_checkpoint(last)
            if hist.exists():
                with open(hist, "r", encoding="utf-8") as fh:
                    prior = [RoundReport(**json.loads(line)) for line in fh if line.strip()]
            start_round = len(prior)
        result = run_training(
            model_cfg,
            dataset,
            dataset.partitions,
            round_cfg,
            master_seed,
            out_dir=train_dir,
            threads=threads,
            initial_vector=initial_vector,
            start_round=start_round,
            prior_history=prior,
            checkpoint_prefix=row,
        )
        results[row] = result
        files += [
            train_dir / f"{row}_best.bin",
            train_dir / f"{row}_best.json",
            train_dir / f"{row}_last.bin",
            train_dir / f"{row}_last.json",
            train_dir / f"{row}_history.jsonl",
        ]
    write_run_manifest(out_dir, "train", config, files, started)
    return results


def stage_adapt(config: ExperimentConfig, episodes_override: int | None = None) -> dict[str, QTable]:
    started = _now_iso()
    dataset = _load_dataset_checked(config)
    out_dir = Path(config.out_dir)
    train_dir = out_dir / TRAIN_DIR
    adapt_dir = out_dir / ADAPT_DIR
    adapt_dir.mkdir(parents=True, exist_ok=True)
    episodes = config.rl_episodes if episodes_override is None else int(episodes_override)

    policies = {}
    files: list[Path] = []
    for row in _recognizer_rows(config):
        ckpt = train_dir / f"{row}_best.bin"
        if not ckpt.exists():
            raise ConfigError(f"missing checkpoint for row {row!r}: {ckpt}; run train first")
        vector, _ = load_checkpoint(ckpt)
        model_cfg = model_config_for_row(row, config.comparison.model)
        model = GestureModel(model_cfg, seed=0)
        model.load_parameter_vector(vector)
        accuracies = measure_user_accuracies(model, dataset, dataset.split.train_participants)
        users = build_users(dataset, accuracies, derive_seed(config.seed, "adapt-users", row))
        q, curves = train_policy(
            users, config.rl, episodes, derive_seed(config.seed, "adapt", row)
        )
        policies[row] = q
        q.export_csv(adapt_dir / f"qtable_{row}.csv")
        q.export_json(adapt_dir / f"qtable_{row}.json")
        curve_path = adapt_dir / f"curves_{row}.csv"
        with open(curve_path, "w", encoding="utf-8") as fh:
            fh.write("episode,return\n")
            for i, value in enumerate(curves):
                fh.write(f"{i},{value:.6g}\n")
        files += [
            adapt_dir / f"qtable_{row}.csv",
            adapt_dir / f"qtable_{row}.json",
            curve_path,
        ]
    write_run_manifest(out_dir, "adapt", config, files, started)
    return policies


def stage_evaluate(config: ExperimentConfig, json_only: bool = False) -> list:
    started = _now_iso()
    dataset = _load_dataset_checked(config)
    out_dir = Path(config.out_dir)
    train_dir = out_dir / TRAIN_DIR
    adapt_dir = out_dir / ADAPT_DIR
    eval_dir = out_dir / EVAL_DIR

    checkpoints = {}
    policies = {}
    for row in config.comparison.rows:
        source = "ours" if row == "static" else row
        ckpt = train_dir / f"{source}_best.bin"
        if not ckpt.exists():
            raise ConfigError(f"comparison row {row!r}: missing checkpoint {ckpt}")
        checkpoints[source], _ = load_checkpoint(ckpt)
        if row != "static":
            qpath = adapt_dir / f"qtable_{row}.json"
            if not qpath.exists():
                raise ConfigError(f"comparison row {row!r}: missing policy {qpath}")
            policies[row] = QTable.load_json(qpath)

    reports = run_comparison(
        dataset,
        checkpoints,
        policies,
        config.rl,
        config.comparison,
        derive_seed(config.seed, "evaluate"),
    )
    eval_dir.mkdir(parents=True, exist_ok=True)
    files = []
    metrics_path = eval_dir / "metrics.json"
    write_metrics_json(reports, metrics_path, meta={"seed": config.seed, "scale": config.scale})
    files.append(metrics_path)
    if not json_only:
        table_path = eval_dir / "table1.csv"
        write_table_csv(reports, table_path)
        files.append(table_path)
    write_run_manifest(out_dir, "evaluate", config, files, started)
    return reports


def stage_report(out_dir: Path | str) -> str:
    """Verify manifests under a run directory and render the result table."""
    out_dir = Path(out_dir)
    if not out_dir.exists():
        raise ConfigError(f"run directory not found: {out_dir}")
    lines = []
    problems_total = 0
    for manifest in sorted(out_dir.glob("manifest_*.json")):
        problems = verify_run_manifest(manifest)
        problems_total += len(problems)
        status = "ok" if not problems else "; ".join(problems)
        lines.append(f"{manifest.name}: {status}")
    table = out_dir / EVAL_DIR / "table1.csv"
    if table.exists():
        lines.append("")
        lines.append(table.read_text(encoding="utf-8").strip())
    if problems_total:
        raise ValidationError("\n".join(lines))
    return "\n".join(lines)
