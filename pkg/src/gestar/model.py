"""The full gesture recognizer: encoders, fusion, context conditioning, head.

A :class:`GestureModel` owns every trainable tensor in a fixed creation
order, exposing them as one flat float64 vector. That vector is the unit of
federated exchange and the checkpoint payload; named sub-module ranges are
derived from the same ordering. Ablated variants (single-modality rows of
the comparison table) are the same model with a restricted ``modalities``
tuple.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .context import ContextConditioner, ContextEncoder
from .encoders import AccelEncoder, EmgEncoder, VisualEncoder, ring_skip_adjacency
from .errors import ShapeError
from .fusion import Classifier, FusionWeights, cross_entropy, fuse_embeddings
from .rng import rng_for
from .tensor import Tape, Tensor


@dataclass
class ModelConfig:
    embed_dim: int = 32
    n_classes: int = 15
    modalities: tuple[str, ...] = ("visual", "accel", "emg")
    use_context: bool = True
    # visual
    frame_size: int = 32
    patch_size: int = 4
    vit_blocks: int = 2
    vit_heads: int = 4
    vit_ffn: int = 64
    # accelerometer
    accel_channels: int = 3
    denoise_kernel: int = 5
    tcn_kernel: int = 3
    tcn_dilations: tuple[int, ...] = (1, 2, 4)
    accel_heads: int = 4
    # EMG
    n_electrodes: int = 8
    emg_windows: int = 4
    # context
    ctx_channels: int = 2
    ctx_token_dim: int = 8
    ctx_dim: int = 8
    ctx_heads: int = 2
    ctx_ffn: int = 16
    # feed-forward dropout during training; off by default for determinism
    dropout: float = 0.0

    def __post_init__(self):
        self.modalities = tuple(self.modalities)
        self.tcn_dilations = tuple(self.tcn_dilations)
        known = {"visual", "accel", "emg"}
        if not self.modalities or not set(self.modalities) <= known:
            raise ShapeError(f"modalities must be a non-empty subset of {sorted(known)}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["modalities"] = list(self.modalities)
        d["tcn_dilations"] = list(self.tcn_dilations)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(**d)


@dataclass
class Batch:
    """Stacked sample arrays; the unit every forward pass consumes."""

    frames: np.ndarray  # [B, F, F]
    accel: np.ndarray  # [B, T, 3]
    emg: np.ndarray  # [B, T, E]
    adjacency: np.ndarray  # [E, E]
    context: np.ndarray  # [B, C]
    labels: np.ndarray  # [B]

    @classmethod
    def from_samples(cls, samples, adjacency: np.ndarray) -> "Batch":
        return cls(
            frames=np.stack([s.frame for s in samples]),
            accel=np.stack([s.accel for s in samples]),
            emg=np.stack([s.emg for s in samples]),
            adjacency=adjacency,
            context=np.stack([s.context for s in samples]),
            labels=np.asarray([s.label for s in samples], dtype=np.int64),
        )

    def __len__(self) -> int:
        return len(self.labels)


class GestureModel:
    def __init__(self, config: ModelConfig, seed: int = 0):
        self.config = config
        rng = rng_for(seed, "model-init")
        d = config.embed_dim
        self.visual = None
        self.accel = None
        self.emg = None
        # construction order is fixed; it defines the flat parameter layout
        if "visual" in config.modalities:
            self.visual = VisualEncoder(
                rng,
                frame_size=config.frame_size,
                patch_size=config.patch_size,
                dim=d,
                n_heads=config.vit_heads,
                n_blocks=config.vit_blocks,
                ffn_hidden=config.vit_ffn,
                out_dim=d,
            )
        if "accel" in config.modalities:
            self.accel = AccelEncoder(
                rng,
                in_channels=config.accel_channels,
                dim=d,
                denoise_kernel=config.denoise_kernel,
                tcn_kernel=config.tcn_kernel,
                dilations=config.tcn_dilations,
                n_heads=config.accel_heads,
            )
        if "emg" in config.modalities:
            self.emg = EmgEncoder(
                rng, n_electrodes=config.n_electrodes, n_windows=config.emg_windows, dim=d
            )
        self.fusion_weights = FusionWeights(len(config.modalities))
        self.context_encoder = None
        self.conditioner = None
        if config.use_context:
            self.context_encoder = ContextEncoder(
                rng,
                n_channels=config.ctx_channels,
                token_dim=config.ctx_token_dim,
                out_dim=config.ctx_dim,
                n_heads=config.ctx_heads,
                ffn_hidden=config.ctx_ffn,
            )
            self.conditioner = ContextConditioner(ctx_dim=config.ctx_dim, feature_dim=d)
        self.classifier = Classifier(rng, dim=d, n_classes=config.n_classes)
        self._named_params = self._collect_parameters()
        self._layout = self._build_layout()

    # -- parameter plumbing -------------------------------------------------

    def _collect_parameters(self) -> list[tuple[str, Tensor]]:
        named: list[tuple[str, Tensor]] = []
        for part in (self.visual, self.accel, self.emg):
            if part is not None:
                named.extend(part.parameters())
        named.extend(self.fusion_weights.parameters())
        if self.context_encoder is not None:
            named.extend(self.context_encoder.parameters())
            named.extend(self.conditioner.parameters())
        named.extend(self.classifier.parameters())
        return named

    def _build_layout(self) -> list[tuple[str, int, int]]:
        layout = []
        offset = 0
        for name, p in self._named_params:
            layout.append((name, offset, p.size))
            offset += p.size
        return layout

    @property
    def n_params(self) -> int:
        return sum(p.size for _, p in self._named_params)

    def named_parameters(self) -> list[tuple[str, Tensor]]:
        return list(self._named_params)

    def parameter_vector(self) -> np.ndarray:
        return np.concatenate([p.data.reshape(-1) for _, p in self._named_params])

    def gradient_vector(self) -> np.ndarray:
        parts = []
        for _, p in self._named_params:
            g = p.grad if p.grad is not None else np.zeros_like(p.data)
            parts.append(np.asarray(g).reshape(-1))
        return np.concatenate(parts)

    def load_parameter_vector(self, vector: np.ndarray) -> None:
        vector = np.asarray(vector, dtype=np.float64)
        if vector.size != self.n_params:
            raise ShapeError(f"expected {self.n_params} parameters, got {vector.size}")
        for (name, p), (_, offset, size) in zip(self._named_params, self._layout):
            p.data = vector[offset : offset + size].reshape(p.data.shape).copy()

    def zero_grad(self) -> None:
        for _, p in self._named_params:
            p.grad = None

    def module_slices(self) -> dict[str, tuple[int, int]]:
        """Top-level module name -> (offset, length) in the flat vector."""
        slices: dict[str, list[int]] = {}
        for name, offset, size in self._layout:
            top = name.split(".", 1)[0]
            if top not in slices:
                slices[top] = [offset, 0]
            slices[top][1] += size
        return {k: (v[0], v[1]) for k, v in slices.items()}

    # -- forward ------------------------------------------------------------

    def default_adjacency(self) -> np.ndarray:
        return ring_skip_adjacency(self.config.n_electrodes)

    def fused_feature(
        self, batch: Batch, collect: list | None = None, dropout_rng=None
    ) -> Tensor:
        drop = None
        if dropout_rng is not None and self.config.dropout > 0.0:
            drop = (self.config.dropout, dropout_rng)
        embeddings = []
        for modality in self.config.modalities:
            if modality == "visual":
                embeddings.append(self.visual(batch.frames, collect=collect, drop=drop))
            elif modality == "accel":
                embeddings.append(self.accel(batch.accel, collect=collect))
            elif modality == "emg":
                embeddings.append(self.emg(batch.emg, batch.adjacency, collect=collect))
        fused = fuse_embeddings(embeddings, self.fusion_weights)
        if self.context_encoder is not None:
            ctx = self.context_encoder(batch.context[:, : self.config.ctx_channels], collect=collect)
            fused = self.conditioner(fused, ctx)
        return fused

    def forward_logits(self, batch: Batch, collect: list | None = None, dropout_rng=None) -> Tensor:
        return self.classifier.logits(
            self.fused_feature(batch, collect=collect, dropout_rng=dropout_rng)
        )

    def loss(self, batch: Batch, dropout_rng=None, class_weights=None) -> Tensor:
        return cross_entropy(
            self.forward_logits(batch, dropout_rng=dropout_rng), batch.labels, class_weights
        )

    def predict(self, batch: Batch) -> np.ndarray:
        logits = self.forward_logits(batch)
        return np.argmax(logits.data, axis=-1)

    def predict_samples(self, samples, batch_size: int = 64) -> np.ndarray:
        adjacency = self.default_adjacency()
        out = []
        for start in range(0, len(samples), batch_size):
            chunk = samples[start : start + batch_size]
            out.append(self.predict(Batch.from_samples(chunk, adjacency)))
        return np.concatenate(out) if out else np.zeros(0, dtype=np.int64)


def train_denoiser(
    encoder: AccelEncoder,
    clean_series: np.ndarray,
    noise_sigma: float,
    steps: int,
    lr: float,
    rng: np.random.Generator,
    batch_size: int = 16,
) -> list[float]:
    """Fit the smoothing pre-pass on (clean, clean + noise) pairs.

    Reconstruction objective only; the rest of the encoder is untouched.
    Returns the per-step loss trace.
    """
    clean_series = np.asarray(clean_series, dtype=np.float64)
    n = clean_series.shape[0]
    params = [encoder.dn_kernel, encoder.dn_bias]
    losses = []
    for _ in range(int(steps)):
        idx = rng.integers(0, n, size=min(batch_size, n))
        batch = clean_series[idx]
        noisy = batch + rng.normal(0.0, noise_sigma, size=batch.shape)
        with Tape() as tape:
            recon = encoder.denoise(Tensor(noisy))
            err = recon - Tensor(batch)
            loss = (err * err).mean()
        tape.backward(loss)
        for p in params:
            if p.grad is not None:
                p.data = p.data - lr * p.grad
            p.grad = None
        losses.append(loss.item())
    return losses
