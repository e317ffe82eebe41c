"""Simulated federated training rounds over partitioned synthetic clients.

Each round copies the global parameter vector to every participating
client, runs local mini-batch training, and merges the results with
sample-count-weighted averaging. Client work is independent (private
parameter copy, derived seed), so rounds may fan out over a thread pool;
results are identical for any worker count because per-client seeds depend
only on (master seed, round, client id) and the merge is order-fixed.

A plain centralized trainer lives here too: with a single client owning
all the data, the federated loop reproduces it bit for bit, and tests pin
that equivalence.
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .aggregation import ClientUpdate, aggregate
from .checkpoint import save_checkpoint
from .errors import NumericError, ParameterError
from .metrics import macro_f1_from_labels
from .model import Batch, GestureModel, ModelConfig, train_denoiser
from .optim import OptimizerState, make_optimizer_state, optimizer_step
from .rng import derive_seed, rng_for
from .synthdata import ClientPartition, Dataset, DatasetSpec, generate_participant, generate_sample
from .tensor import Tape


@dataclass
class RoundConfig:
    rounds: int = 50
    local_epochs: int = 2
    lr: float = 3e-3
    lr_decay: float = 1.0  # per-round multiplier on the client learning rate
    batch_size: int = 16
    client_fraction: float = 1.0
    patience: int = 5
    optimizer: str = "adam"  # plain sgd available; see decisions notes
    class_weighting: str = "uniform"  # or "inverse" frequency
    pretrain_denoiser: bool = True
    denoiser_steps: int = 150
    denoiser_lr: float = 0.01
    denoiser_noise: float = 0.1

    def __post_init__(self):
        if not 0.0 < self.client_fraction <= 1.0:
            raise ParameterError(f"client fraction must be in (0, 1], got {self.client_fraction}")
        if self.local_epochs < 1:
            raise ParameterError(f"local epochs must be >= 1, got {self.local_epochs}")
        if self.rounds < 0:
            raise ParameterError(f"rounds must be >= 0, got {self.rounds}")
        if not 0.0 < self.lr_decay <= 1.0:
            raise ParameterError(f"lr decay must be in (0, 1], got {self.lr_decay}")
        if self.class_weighting not in ("uniform", "inverse"):
            raise ParameterError(f"unknown class weighting {self.class_weighting!r}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "RoundConfig":
        return cls(**d)


@dataclass
class RoundReport:
    round_index: int
    participants: list[int]
    client_stats: list[dict]
    val_f1: float
    seconds: float
    total_samples: int

    def to_json_line(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


@dataclass
class TrainingResult:
    history: list[RoundReport]
    best_vector: np.ndarray
    best_round: int
    best_val_f1: float
    last_vector: np.ndarray


def _sgd_epochs(
    model: GestureModel,
    samples: list,
    cfg: RoundConfig,
    seed: int,
    context: str,
    state: OptimizerState | None = None,
    lr_override: float | None = None,
) -> tuple[list[float], OptimizerState]:
    """Mini-batch training epochs on ``model`` in place; returns batch losses.

    ``state`` carries optimizer moments across calls (a stateful client);
    a fresh state is created when absent. ``lr_override`` sets the rate for
    this call, which is how per-round decay reaches a persistent state.
    """
    adjacency = model.default_adjacency()
    if state is None:
        state = make_optimizer_state(cfg.optimizer, cfg.lr, model.n_params)
    if lr_override is not None:
        state.lr = float(lr_override)
    rng = rng_for(seed, "batch-order")
    dropout_rng = rng_for(seed, "dropout") if model.config.dropout > 0.0 else None
    class_weights = None
    if cfg.class_weighting == "inverse":
        counts = np.bincount([s.label for s in samples], minlength=model.config.n_classes)
        inv = 1.0 / np.maximum(counts, 1)
        class_weights = inv * (model.config.n_classes / inv.sum())
    losses: list[float] = []
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        for _ in range(cfg.local_epochs):
            order = rng.permutation(len(samples))
            for start in range(0, len(order), cfg.batch_size):
                chunk = [samples[i] for i in order[start : start + cfg.batch_size]]
                batch = Batch.from_samples(chunk, adjacency)
                with Tape() as tape:
                    loss = model.loss(batch, dropout_rng=dropout_rng, class_weights=class_weights)
                value = loss.item()
                if not np.isfinite(value):
                    raise NumericError(f"non-finite loss during {context}")
                tape.backward(loss)
                new_vec = optimizer_step(model.parameter_vector(), model.gradient_vector(), state)
                model.load_parameter_vector(new_vec)
                model.zero_grad()
                losses.append(value)
    return losses, state


def local_train(
    global_params: np.ndarray,
    model_cfg: ModelConfig,
    samples: list,
    cfg: RoundConfig,
    seed: int,
    client_id: int,
    opt_state: OptimizerState | None = None,
    lr_override: float | None = None,
) -> tuple[ClientUpdate, OptimizerState]:
    """Train a private copy of the global model on one client's samples.

    Returns the update for aggregation plus the client's optimizer state,
    which stays on the client side (never aggregated).
    """
    if not samples:
        raise ParameterError(f"client {client_id} has no samples")
    model = GestureModel(model_cfg, seed=0)
    model.load_parameter_vector(global_params)
    losses, opt_state = _sgd_epochs(
        model,
        samples,
        cfg,
        seed,
        context=f"client {client_id}",
        state=opt_state,
        lr_override=lr_override,
    )
    update = ClientUpdate(
        client_id=client_id,
        params=model.parameter_vector(),
        n_samples=len(samples),
        loss_trace=losses,
    )
    return update, opt_state


def _client_seed(master_seed: int, round_index: int, client_id: int) -> int:
    return derive_seed(master_seed, "round", round_index, "client", client_id)


def run_round(
    global_params: np.ndarray,
    model_cfg: ModelConfig,
    dataset: Dataset,
    partitions: list[ClientPartition],
    cfg: RoundConfig,
    master_seed: int,
    round_index: int,
    threads: int = 1,
    eval_model: GestureModel | None = None,
    opt_states: dict[int, OptimizerState] | None = None,
) -> tuple[np.ndarray, RoundReport]:
    """One federated round: select clients, train locally, average, validate.

    ``opt_states`` maps client id to that client's persistent optimizer
    state; it is read and updated in place when provided.
    """
    t0 = time.perf_counter()
    if cfg.client_fraction < 1.0:
        k = max(1, int(round(cfg.client_fraction * len(partitions))))
        rng = rng_for(master_seed, "participation", round_index)
        chosen_ids = sorted(rng.choice(len(partitions), size=k, replace=False).tolist())
        chosen = [partitions[i] for i in chosen_ids]
    else:
        chosen = list(partitions)

    round_lr = cfg.lr * cfg.lr_decay**round_index

    def work(part: ClientPartition) -> tuple[ClientUpdate, OptimizerState]:
        prior = opt_states.get(part.client_id) if opt_states is not None else None
        return local_train(
            global_params,
            model_cfg,
            dataset.samples_at(part.sample_indices),
            cfg,
            _client_seed(master_seed, round_index, part.client_id),
            part.client_id,
            opt_state=prior,
            lr_override=round_lr,
        )

    if threads > 1 and len(chosen) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(work, chosen))
    else:
        outcomes = [work(part) for part in chosen]
    updates = [u for u, _ in outcomes]
    if opt_states is not None:
        for update, state in outcomes:
            opt_states[update.client_id] = state
    new_global = aggregate(updates)

    if eval_model is None:
        eval_model = GestureModel(model_cfg, seed=0)
    eval_model.load_parameter_vector(new_global)
    val_samples = dataset.samples_at(dataset.split.val_indices)
    y_true = np.asarray([s.label for s in val_samples])
    val_f1 = macro_f1_from_labels(
        y_true, eval_model.predict_samples(val_samples), model_cfg.n_classes
    )
    updates_sorted = sorted(updates, key=lambda u: u.client_id)
    report = RoundReport(
        round_index=round_index,
        participants=[u.client_id for u in updates_sorted],
        client_stats=[
            {
                "id": u.client_id,
                "n": u.n_samples,
                "final_loss": u.loss_trace[-1] if u.loss_trace else None,
            }
            for u in updates_sorted
        ],
        val_f1=val_f1,
        seconds=time.perf_counter() - t0,
        total_samples=sum(u.n_samples for u in updates_sorted),
    )
    return new_global, report


def pretrain_denoiser_from_spec(
    model: GestureModel, spec: DatasetSpec, cfg: RoundConfig, master_seed: int
) -> None:
    """Fit the accel smoothing pre-pass on clean synthetic strokes.

    Clean series are regenerated from the dataset spec with all noise
    disabled, so no client data is touched.
    """
    if model.accel is None:
        return
    clean_spec = DatasetSpec.from_dict(
        {**spec.to_dict(), "accel_noise_g": 0.0, "emg_noise": 0.0, "visual_noise": 0.0}
    )
    rng = rng_for(master_seed, "denoiser-pretrain")
    series = []
    for i in range(64):
        label = int(rng.integers(0, clean_spec.n_classes))
        profile = generate_participant(
            derive_seed(master_seed, "denoiser-profile", i), bool(rng.integers(0, 2)), participant_id=i
        )
        sample = generate_sample(
            profile, label, derive_seed(master_seed, "denoiser-sample", i), clean_spec
        )
        series.append(sample.accel)
    train_denoiser(
        model.accel,
        np.stack(series),
        noise_sigma=cfg.denoiser_noise,
        steps=cfg.denoiser_steps,
        lr=cfg.denoiser_lr,
        rng=rng_for(master_seed, "denoiser-steps"),
    )


def run_training(
    model_cfg: ModelConfig,
    dataset: Dataset,
    partitions: list[ClientPartition],
    cfg: RoundConfig,
    master_seed: int,
    out_dir: Path | str | None = None,
    threads: int = 1,
    initial_vector: np.ndarray | None = None,
    start_round: int = 0,
    prior_history: list[RoundReport] | None = None,
    checkpoint_prefix: str = "checkpoint",
) -> TrainingResult:
    """Round loop with early stopping on validation macro F1.

    Stops when validation F1 has not improved for more than ``patience``
    consecutive rounds. Writes best/last checkpoints and a JSONL round
    history when ``out_dir`` is given.
    """
    model = GestureModel(model_cfg, seed=derive_seed(master_seed, "init"))
    if initial_vector is not None:
        vector = np.asarray(initial_vector, dtype=np.float64).copy()
    else:
        if cfg.pretrain_denoiser:
            pretrain_denoiser_from_spec(model, dataset.spec, cfg, master_seed)
        vector = model.parameter_vector()
    eval_model = GestureModel(model_cfg, seed=0)

    history: list[RoundReport] = list(prior_history or [])
    best_vec = vector.copy()
    best_f1 = -1.0
    best_round = -1
    streak = 0
    for rep in history:  # replay early-stopping state when resuming
        if rep.val_f1 > best_f1 + 1e-12:
            best_f1, best_round, streak = rep.val_f1, rep.round_index, 0
        else:
            streak += 1

    out_path = Path(out_dir) if out_dir is not None else None
    history_file = None
    opt_states: dict[int, OptimizerState] = {}
    if out_path is not None:
        out_path.mkdir(parents=True, exist_ok=True)
        history_file = out_path / f"{checkpoint_prefix}_history.jsonl"
        state_file = out_path / f"{checkpoint_prefix}_optstate.npz"
        if start_round == 0:
            history_file.write_text("")
        elif state_file.exists():
            opt_states = _load_opt_states(state_file, cfg)

    for round_index in range(start_round, cfg.rounds):
        vector, report = run_round(
            vector,
            model_cfg,
            dataset,
            partitions,
            cfg,
            master_seed,
            round_index,
            threads=threads,
            eval_model=eval_model,
            opt_states=opt_states,
        )
        history.append(report)
        if history_file is not None:
            with open(history_file, "a", encoding="utf-8") as fh:
                fh.write(report.to_json_line() + "\n")
        if report.val_f1 > best_f1 + 1e-12:
            best_f1 = report.val_f1
            best_round = round_index
            best_vec = vector.copy()
            streak = 0
        else:
            streak += 1
            if streak > cfg.patience:
                break

    if best_round < 0:  # zero rounds: the initial vector is the best we have
        best_vec = vector.copy()
    if out_path is not None:
        meta = {"best_round": best_round, "best_val_f1": best_f1, "rounds_run": len(history)}
        save_checkpoint(out_path / f"{checkpoint_prefix}_best.bin", best_vec, model.module_slices(), meta)
        save_checkpoint(out_path / f"{checkpoint_prefix}_last.bin", vector, model.module_slices(), meta)
        _save_opt_states(out_path / f"{checkpoint_prefix}_optstate.npz", opt_states)
    return TrainingResult(
        history=history,
        best_vector=best_vec,
        best_round=best_round,
        best_val_f1=best_f1,
        last_vector=vector,
    )


def _save_opt_states(path: Path, states: dict[int, OptimizerState]) -> None:
    arrays = {}
    for cid, st in states.items():
        arrays[f"m_{cid}"] = st.m
        arrays[f"v_{cid}"] = st.v
        arrays[f"step_{cid}"] = np.asarray([st.step])
    np.savez(path, **arrays)


def _load_opt_states(path: Path, cfg: RoundConfig) -> dict[int, OptimizerState]:
    states: dict[int, OptimizerState] = {}
    with np.load(path) as payload:
        cids = sorted({int(k.split("_", 1)[1]) for k in payload.files if k.startswith("m_")})
        for cid in cids:
            m = payload[f"m_{cid}"]
            state = make_optimizer_state(cfg.optimizer, cfg.lr, m.size)
            state.m = m.astype(np.float64)
            state.v = payload[f"v_{cid}"].astype(np.float64)
            state.step = int(payload[f"step_{cid}"][0])
            states[cid] = state
    return states


def train_centralized(
    model_cfg: ModelConfig,
    dataset: Dataset,
    cfg: RoundConfig,
    master_seed: int,
    threads: int = 1,  # accepted for interface parity; centralized runs single-threaded
) -> TrainingResult:
    """Plain epoch loop on the pooled training split.

    Written independently of the federated path on purpose: one epoch here
    must equal one round of a single-client federated run bit for bit, and
    tests compare the two.
    """
    model = GestureModel(model_cfg, seed=derive_seed(master_seed, "init"))
    if cfg.pretrain_denoiser:
        pretrain_denoiser_from_spec(model, dataset.spec, cfg, master_seed)
    vector = model.parameter_vector()
    train_samples = dataset.samples_at(dataset.split.train_indices)
    val_samples = dataset.samples_at(dataset.split.val_indices)
    y_val = np.asarray([s.label for s in val_samples])
    eval_model = GestureModel(model_cfg, seed=0)

    history: list[RoundReport] = []
    best_vec = vector.copy()
    best_f1 = -1.0
    best_round = -1
    streak = 0
    opt_state: OptimizerState | None = None
    for epoch in range(cfg.rounds):
        t0 = time.perf_counter()
        model.load_parameter_vector(vector)
        losses, opt_state = _sgd_epochs(
            model,
            train_samples,
            cfg,
            _client_seed(master_seed, epoch, 0),
            context=f"epoch {epoch}",
            state=opt_state,
            lr_override=cfg.lr * cfg.lr_decay**epoch,
        )
        vector = model.parameter_vector()
        eval_model.load_parameter_vector(vector)
        val_f1 = macro_f1_from_labels(
            y_val, eval_model.predict_samples(val_samples), model_cfg.n_classes
        )
        history.append(
            RoundReport(
                round_index=epoch,
                participants=[0],
                client_stats=[{"id": 0, "n": len(train_samples), "final_loss": losses[-1]}],
                val_f1=val_f1,
                seconds=time.perf_counter() - t0,
                total_samples=len(train_samples),
            )
        )
        if val_f1 > best_f1 + 1e-12:
            best_f1, best_round, streak = val_f1, epoch, 0
            best_vec = vector.copy()
        else:
            streak += 1
            if streak > cfg.patience:
                break
    if best_round < 0:
        best_vec = vector.copy()
    return TrainingResult(
        history=history,
        best_vector=best_vec,
        best_round=best_round,
        best_val_f1=best_f1,
        last_vector=vector,
    )
