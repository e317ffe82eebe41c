"""Comparison harness: full system vs single-modality recognizers vs static UI.

Five rows share one synthetic dataset and seed discipline: the fused
recognizer with an adaptive policy ("Ours"), each single-modality encoder
with its own classifier and policy, and the fused recognizer pinned to the
default static configuration. Gesture F1 comes from the held-out test
split; adaptation metrics come from frozen-policy rollouts against
simulated users built from the test-split participants, whose capability
inference is driven by each row's own recognizer accuracy.

The static row has no recognition column (nothing to adapt, nothing new to
recognize beyond the fused model) and charges a declared constant
adjustment latency; its table entry for F1 is "-".
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .adaptui import (
    DEFAULT_STATIC_CONFIG,
    QTable,
    RLHyperparams,
    SimulatedUser,
    evaluate_policy,
    make_user,
)
from .errors import ConfigError
from .metrics import (
    ConfusionMatrix,
    MetricsReport,
    adjustment_latency,
    f1_macro,
    f1_micro,
    per_class_f1,
    simulate_sus_responses,
    sus_score,
    task_success_rate,
)
from .model import GestureModel, ModelConfig
from .rng import derive_seed, rng_for
from .synthdata import Dataset

RECOGNIZER_ROWS = ("ours", "vit", "tcn", "gat")
ALL_ROWS = RECOGNIZER_ROWS + ("static",)
DISPLAY_NAMES = {"ours": "Ours", "vit": "ViT", "tcn": "TCN", "gat": "GAT", "static": "Static"}
TABLE_COLUMNS = ["Model", "F1-Score", "Latency (ms)", "Task Success Rate (%)", "Accessibility Score"]

ROW_MODALITIES = {
    "ours": ("visual", "accel", "emg"),
    "vit": ("visual",),
    "tcn": ("accel",),
    "gat": ("emg",),
}


def model_config_for_row(row: str, base: ModelConfig) -> ModelConfig:
    if row == "static":
        row = "ours"
    if row not in ROW_MODALITIES:
        raise ConfigError(f"unknown comparison row {row!r}")
    d = base.to_dict()
    d["modalities"] = list(ROW_MODALITIES[row])
    d["use_context"] = base.use_context and row == "ours"
    return ModelConfig.from_dict(d)


def measure_user_accuracies(
    model: GestureModel, dataset: Dataset, participant_ids: list[int]
) -> dict[int, float]:
    """Recognition accuracy per participant on that participant's samples."""
    by_pid: dict[int, list] = {pid: [] for pid in participant_ids}
    wanted = set(participant_ids)
    for s in dataset.samples:
        if s.participant_id in wanted:
            by_pid[s.participant_id].append(s)
    out = {}
    for pid in sorted(by_pid):
        samples = by_pid[pid]
        if not samples:
            out[pid] = 0.0
            continue
        pred = model.predict_samples(samples)
        labels = np.asarray([s.label for s in samples])
        out[pid] = float((pred == labels).mean())
    return out


def build_users(dataset: Dataset, accuracies: dict[int, float], master_seed: int) -> list[SimulatedUser]:
    users = []
    for pid in sorted(accuracies):
        profile = dataset.profile_of(pid)
        users.append(make_user(profile, accuracies[pid], derive_seed(master_seed, "user", pid)))
    return users


@dataclass
class ComparisonConfig:
    rows: tuple[str, ...] = ALL_ROWS
    eval_episodes_per_user: int = 30
    f1_average: str = "macro"  # or "micro"
    model: ModelConfig = field(default_factory=ModelConfig)

    def __post_init__(self):
        self.rows = tuple(self.rows)
        for row in self.rows:
            if row not in ALL_ROWS:
                raise ConfigError(f"unknown comparison row {row!r}")
        if self.f1_average not in ("macro", "micro"):
            raise ConfigError(f"unknown F1 averaging {self.f1_average!r}")


def _subset_metrics(records, users_subset, satisfactions, rng) -> dict:
    if not records:
        return {"n_users": 0}
    lat = adjustment_latency(records)
    sats = [satisfactions[u.profile.participant_id] for u in users_subset]
    return {
        "n_users": len(users_subset),
        "task_success_rate_pct": task_success_rate(records),
        "latency_mean_ms": lat.mean_ms,
        "accessibility_score": sus_score(simulate_sus_responses(sats, rng)),
    }


def evaluate_row(
    row: str,
    dataset: Dataset,
    checkpoint_vector: np.ndarray,
    policy: QTable | None,
    hp: RLHyperparams,
    cfg: ComparisonConfig,
    master_seed: int,
) -> MetricsReport:
    model_cfg = model_config_for_row(row, cfg.model)
    model = GestureModel(model_cfg, seed=0)
    model.load_parameter_vector(checkpoint_vector)

    test_samples = dataset.samples_at(dataset.split.test_indices)
    impaired_pids = {p.participant_id for p in dataset.profiles if p.impaired}

    # recognition quality on the held-out split (skipped for the static row)
    f1 = None
    per_cls: list[float] = []
    cm_sub = {}
    if row != "static":
        y_true = np.asarray([s.label for s in test_samples])
        y_pred = model.predict_samples(test_samples)
        cm = ConfusionMatrix.from_labels(y_true, y_pred, model_cfg.n_classes)
        f1 = f1_macro(cm) if cfg.f1_average == "macro" else f1_micro(cm)
        per_cls = [float(v) for v in per_class_f1(cm)]
        for tag, keep in (("impaired", True), ("unimpaired", False)):
            mask = np.asarray([(s.participant_id in impaired_pids) == keep for s in test_samples])
            cm_sub[tag] = ConfusionMatrix.from_labels(y_true[mask], y_pred[mask], model_cfg.n_classes)

    # adaptation rollouts against held-out users, capability inferred from
    # this row's recognizer
    accuracies = measure_user_accuracies(model, dataset, dataset.split.test_participants)
    users = build_users(dataset, accuracies, master_seed)
    static_config = DEFAULT_STATIC_CONFIG if row == "static" else None
    rollout_policy = policy if policy is not None else QTable()
    evaluation = evaluate_policy(
        users,
        rollout_policy,
        hp,
        episodes_per_user=cfg.eval_episodes_per_user,
        seed=derive_seed(master_seed, "eval", row),
        static_config=static_config,
    )
    records = evaluation.all_records()
    lat = adjustment_latency(records)
    sus_rng = rng_for(master_seed, "sus", row)
    sats = [evaluation.satisfaction_by_user[u.profile.participant_id] for u in users]
    accessibility = sus_score(simulate_sus_responses(sats, sus_rng))

    sub = {}
    for tag, keep in (("impaired", True), ("unimpaired", False)):
        users_subset = [u for u in users if u.profile.impaired == keep]
        recs = []
        for u in users_subset:
            recs.extend(evaluation.records_by_user[u.profile.participant_id])
        sub_rng = rng_for(master_seed, "sus", row, tag)
        stats = _subset_metrics(recs, users_subset, evaluation.satisfaction_by_user, sub_rng)
        if row != "static" and tag in cm_sub:
            stats["f1"] = f1_macro(cm_sub[tag])
            stats["n_samples"] = cm_sub[tag].total
        sub[tag] = stats

    return MetricsReport(
        name=row,
        f1=f1,
        per_class=per_cls,
        latency_mean_ms=lat.mean_ms,
        latency_p95_ms=lat.p95_ms,
        success_rate_pct=task_success_rate(records),
        accessibility=accessibility,
        impaired=sub["impaired"],
        unimpaired=sub["unimpaired"],
    )


def run_comparison(
    dataset: Dataset,
    checkpoints: dict[str, np.ndarray],
    policies: dict[str, QTable],
    hp: RLHyperparams,
    cfg: ComparisonConfig,
    master_seed: int,
) -> list[MetricsReport]:
    reports = []
    for row in cfg.rows:
        source = "ours" if row == "static" else row
        if source not in checkpoints:
            raise ConfigError(f"missing checkpoint for comparison row {row!r}")
        policy = None
        if row != "static":
            if row not in policies:
                raise ConfigError(f"missing policy for comparison row {row!r}")
            policy = policies[row]
        reports.append(
            evaluate_row(row, dataset, checkpoints[source], policy, hp, cfg, master_seed)
        )
    return reports


# ---------------------------------------------------------------------------
# serialization


def _fmt(value: float | None) -> str:
    return "-" if value is None else f"{value:.6g}"


def table_rows(reports: list[MetricsReport]) -> list[list[str]]:
    rows = []
    for rep in reports:
        rows.append(
            [
                DISPLAY_NAMES.get(rep.name, rep.name),
                _fmt(rep.f1),
                # whole milliseconds: wall-clock jitter must not reach the file
                str(int(round(rep.latency_mean_ms))),
                _fmt(rep.success_rate_pct),
                _fmt(rep.accessibility),
            ]
        )
    return rows


def write_table_csv(reports: list[MetricsReport], path: Path | str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [",".join(TABLE_COLUMNS)]
    for row in table_rows(reports):
        lines.append(",".join(row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def format_table(reports: list[MetricsReport]) -> str:
    rows = [TABLE_COLUMNS] + table_rows(reports)
    widths = [max(len(r[i]) for r in rows) for i in range(len(TABLE_COLUMNS))]
    out = []
    for r in rows:
        out.append("  ".join(c.ljust(w) for c, w in zip(r, widths)))
    return "\n".join(out)


def _round_floats(obj, sig: int = 6):
    """Round every float in a JSON-ready structure to ``sig`` significant digits."""
    if isinstance(obj, float):
        return float(f"{obj:.{sig}g}")
    if isinstance(obj, dict):
        return {k: _round_floats(v, sig) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round_floats(v, sig) for v in obj]
    return obj


def write_metrics_json(reports: list[MetricsReport], path: Path | str, meta: dict | None = None) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = _round_floats({"rows": [rep.to_dict() for rep in reports], "meta": meta or {}})
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
