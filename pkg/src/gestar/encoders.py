"""Modality encoders mapping raw sensor inputs to a shared embedding space.

Three encoders, one per modality, all emitting vectors of the same length
so they can be fused downstream:

* visual: frames are cut into square patches, linearly embedded, tagged
  with learned positional embeddings, run through a small stack of
  self-attention blocks, and mean-pooled.
* accelerometer: a learned causal smoothing convolution (the denoising
  pre-pass), a stack of dilated causal convolutions, one self-attention
  layer over time, then temporal mean-pooling. Everything before the
  attention layer is causal by construction.
* EMG: classical per-electrode statistics (mean absolute value, RMS,
  zero-crossing rate over windows) become node features for two graph
  attention layers over the electrode adjacency, followed by a mean over
  nodes.

Encoders are pure functions of (input, parameters); with dropout disabled
(the default) they are bit-deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError, ValidationError
from .tensor import (
    Tensor,
    affine,
    as_tensor,
    conv1d_dilated,
    dropout,
    layer_norm,
    leaky_relu,
    relu,
    self_attention,
    softmax,
    uniform_fan_in,
    zeros,
)

LEAKY_SLOPE = 0.2
MASK_OFF = -1e30  # additive mask for non-edges; underflows to exactly 0 after softmax


# ---------------------------------------------------------------------------
# input carriers


@dataclass
class VisualInput:
    """Single grayscale frame with values in [0, 1]."""

    frame: np.ndarray

    def __post_init__(self):
        self.frame = np.asarray(self.frame, dtype=np.float64)
        if self.frame.ndim == 3 and self.frame.shape[-1] == 1:
            self.frame = self.frame[:, :, 0]
        if self.frame.ndim != 2:
            raise ShapeError(f"frame must be [H, W] or [H, W, 1], got {self.frame.shape}")
        if self.frame.min() < 0.0 or self.frame.max() > 1.0:
            raise ValidationError("frame values must lie in [0, 1]")


@dataclass
class AccelInput:
    """Tri-axial accelerometer series in units of g."""

    series: np.ndarray
    sample_rate_hz: float = 64.0

    def __post_init__(self):
        self.series = np.asarray(self.series, dtype=np.float64)
        if self.series.ndim != 2 or self.series.shape[1] != 3:
            raise ShapeError(f"accel series must be [T, 3], got {self.series.shape}")
        if not np.all(np.isfinite(self.series)):
            raise ValidationError("accel series must be finite")


@dataclass
class EmgInput:
    """Multi-electrode EMG series plus the electrode adjacency."""

    series: np.ndarray
    adjacency: np.ndarray

    def __post_init__(self):
        self.series = np.asarray(self.series, dtype=np.float64)
        self.adjacency = np.asarray(self.adjacency, dtype=bool)
        if self.series.ndim != 2:
            raise ShapeError(f"emg series must be [T, E], got {self.series.shape}")
        validate_adjacency(self.adjacency, self.series.shape[1])


@dataclass
class ModalEmbedding:
    vector: np.ndarray
    modality: str


def validate_adjacency(adj: np.ndarray, n_nodes: int | None = None) -> None:
    adj = np.asarray(adj)
    if adj.ndim != 2 or adj.shape[0] != adj.shape[1]:
        raise ValidationError(f"adjacency must be square, got {adj.shape}")
    if n_nodes is not None and adj.shape[0] != n_nodes:
        raise ValidationError(f"adjacency sized {adj.shape[0]} but series has {n_nodes} electrodes")
    if not np.array_equal(adj, adj.T):
        raise ValidationError("adjacency must be symmetric")
    if not np.all(np.diag(adj)):
        raise ValidationError("adjacency must contain self-loops")


def ring_skip_adjacency(n_electrodes: int) -> np.ndarray:
    """Default electrode topology: ring neighbours plus skip-one links."""
    adj = np.eye(n_electrodes, dtype=bool)
    for e in range(n_electrodes):
        for step in (1, 2):
            adj[e, (e + step) % n_electrodes] = True
            adj[e, (e - step) % n_electrodes] = True
    return adj


def full_adjacency(n_electrodes: int) -> np.ndarray:
    return np.ones((n_electrodes, n_electrodes), dtype=bool)


# ---------------------------------------------------------------------------
# shared building blocks


class Linear:
    def __init__(self, rng, n_in: int, n_out: int, name: str, bias: bool = True, zero_init: bool = False):
        if zero_init:
            self.w = zeros((n_in, n_out), requires_grad=True)
        else:
            self.w = uniform_fan_in(rng, (n_in, n_out), fan_in=n_in)
        self.b = zeros(n_out, requires_grad=True) if bias else None
        self.name = name

    def __call__(self, x):
        return affine(as_tensor(x), self.w, self.b)

    def parameters(self):
        out = [(f"{self.name}.w", self.w)]
        if self.b is not None:
            out.append((f"{self.name}.b", self.b))
        return out


class LayerNorm:
    def __init__(self, dim: int, name: str, eps: float = 1e-5):
        self.gain = Tensor(np.ones(dim), requires_grad=True)
        self.bias = zeros(dim, requires_grad=True)
        self.eps = eps
        self.name = name

    def __call__(self, x):
        return layer_norm(as_tensor(x), self.gain, self.bias, self.eps)

    def parameters(self):
        return [(f"{self.name}.gain", self.gain), (f"{self.name}.bias", self.bias)]


class MultiHeadSelfAttention:
    """Scaled dot-product self-attention over the second-to-last axis."""

    def __init__(self, rng, dim: int, n_heads: int, name: str):
        if dim % n_heads != 0:
            raise ShapeError(f"dim {dim} not divisible by {n_heads} heads")
        self.dim = dim
        self.n_heads = n_heads
        self.head_dim = dim // n_heads
        self.wq = Linear(rng, dim, dim, f"{name}.q")
        self.wk = Linear(rng, dim, dim, f"{name}.k")
        self.wv = Linear(rng, dim, dim, f"{name}.v")
        self.wo = Linear(rng, dim, dim, f"{name}.out")
        self.name = name

    def __call__(self, x, collect: list | None = None):
        return self_attention(
            x,
            self.wq.w, self.wq.b,
            self.wk.w, self.wk.b,
            self.wv.w, self.wv.b,
            self.wo.w, self.wo.b,
            self.n_heads,
            collect=collect,
        )

    def parameters(self):
        out = []
        for lin in (self.wq, self.wk, self.wv, self.wo):
            out.extend(lin.parameters())
        return out


class TransformerBlock:
    """Pre-norm attention + feed-forward block with residual connections."""

    def __init__(self, rng, dim: int, n_heads: int, ffn_hidden: int, name: str):
        self.ln1 = LayerNorm(dim, f"{name}.ln1")
        self.attn = MultiHeadSelfAttention(rng, dim, n_heads, f"{name}.attn")
        self.ln2 = LayerNorm(dim, f"{name}.ln2")
        self.ff1 = Linear(rng, dim, ffn_hidden, f"{name}.ff1")
        self.ff2 = Linear(rng, ffn_hidden, dim, f"{name}.ff2")

    def __call__(self, x, collect: list | None = None, drop: tuple | None = None):
        x = x + self.attn(self.ln1(x), collect=collect)
        hidden = relu(self.ff1(self.ln2(x)))
        if drop is not None:
            rate, rng = drop
            hidden = dropout(hidden, rate, rng)
        return x + self.ff2(hidden)

    def parameters(self):
        out = []
        for part in (self.ln1, self.attn, self.ln2, self.ff1, self.ff2):
            out.extend(part.parameters())
        return out


# ---------------------------------------------------------------------------
# visual encoder


class VisualEncoder:
    def __init__(
        self,
        rng,
        frame_size: int = 32,
        patch_size: int = 4,
        dim: int = 32,
        n_heads: int = 4,
        n_blocks: int = 2,
        ffn_hidden: int = 64,
        out_dim: int = 32,
    ):
        if frame_size % patch_size != 0:
            raise ShapeError(f"frame size {frame_size} not divisible by patch size {patch_size}")
        self.frame_size = frame_size
        self.patch_size = patch_size
        self.grid = frame_size // patch_size
        self.n_patches = self.grid * self.grid
        patch_dim = patch_size * patch_size
        self.patch_embed = Linear(rng, patch_dim, dim, "visual.patch_embed")
        self.pos_emb = uniform_fan_in(rng, (self.n_patches, dim), fan_in=dim)
        self.blocks = [
            TransformerBlock(rng, dim, n_heads, ffn_hidden, f"visual.block{i}") for i in range(n_blocks)
        ]
        self.final = Linear(rng, dim, out_dim, "visual.final")

    def patchify(self, frames: np.ndarray) -> np.ndarray:
        b, h, w = frames.shape
        if h != self.frame_size or w != self.frame_size:
            raise ShapeError(f"expected {self.frame_size}x{self.frame_size} frames, got {h}x{w}")
        g, p = self.grid, self.patch_size
        tiles = frames.reshape(b, g, p, g, p).transpose(0, 1, 3, 2, 4)
        return tiles.reshape(b, self.n_patches, p * p)

    def __call__(self, frames: np.ndarray, collect: list | None = None, drop: tuple | None = None) -> Tensor:
        tokens = Tensor(self.patchify(np.asarray(frames, dtype=np.float64)))
        x = self.patch_embed(tokens) + self.pos_emb
        for block in self.blocks:
            x = block(x, collect=collect, drop=drop)
        return self.final(x.mean(axis=1))

    def parameters(self):
        out = self.patch_embed.parameters() + [("visual.pos_emb", self.pos_emb)]
        for block in self.blocks:
            out.extend(block.parameters())
        out.extend(self.final.parameters())
        return out


# ---------------------------------------------------------------------------
# accelerometer encoder


class AccelEncoder:
    MIN_LEN = 8

    def __init__(
        self,
        rng,
        in_channels: int = 3,
        dim: int = 32,
        denoise_kernel: int = 5,
        tcn_kernel: int = 3,
        dilations: tuple[int, ...] = (1, 2, 4),
        n_heads: int = 4,
    ):
        self.in_channels = in_channels
        self.dilations = tuple(dilations)
        # smoother starts near pass-through: identity tap plus small noise
        dn = 0.01 * uniform_fan_in(rng, (denoise_kernel, in_channels, in_channels)).data
        dn[denoise_kernel - 1] += np.eye(in_channels)
        self.dn_kernel = Tensor(dn, requires_grad=True)
        self.dn_bias = zeros(in_channels, requires_grad=True)
        self.tcn_kernels = []
        self.tcn_biases = []
        c_in = in_channels
        for i, _ in enumerate(self.dilations):
            fan = tcn_kernel * c_in
            self.tcn_kernels.append(uniform_fan_in(rng, (tcn_kernel, c_in, dim), fan_in=fan))
            self.tcn_biases.append(zeros(dim, requires_grad=True))
            c_in = dim
        self.ln = LayerNorm(dim, "accel.ln")
        self.attn = MultiHeadSelfAttention(rng, dim, n_heads, "accel.attn")

    def denoise(self, series) -> Tensor:
        return conv1d_dilated(as_tensor(series), self.dn_kernel, 1) + self.dn_bias

    def conv_stack(self, series) -> Tensor:
        """Denoiser plus dilated causal convolutions; everything here is causal."""
        x = self.denoise(series)
        for kern, bias, dil in zip(self.tcn_kernels, self.tcn_biases, self.dilations):
            x = relu(conv1d_dilated(x, kern, dil) + bias)
        return x

    def __call__(self, series: np.ndarray, collect: list | None = None) -> Tensor:
        series = np.asarray(series, dtype=np.float64)
        if series.shape[-2] < self.MIN_LEN:
            raise ShapeError(f"accel series too short: {series.shape[-2]} < {self.MIN_LEN}")
        x = self.conv_stack(Tensor(series))
        x = x + self.attn(self.ln(x), collect=collect)
        return x.mean(axis=-2)

    def parameters(self):
        out = [("accel.denoise.kernel", self.dn_kernel), ("accel.denoise.bias", self.dn_bias)]
        for i, (k, b) in enumerate(zip(self.tcn_kernels, self.tcn_biases)):
            out.append((f"accel.tcn{i}.kernel", k))
            out.append((f"accel.tcn{i}.bias", b))
        out.extend(self.ln.parameters())
        out.extend(self.attn.parameters())
        return out


# ---------------------------------------------------------------------------
# EMG encoder


def emg_node_features(series: np.ndarray, n_windows: int = 4) -> np.ndarray:
    """Per-electrode MAV, RMS, and zero-crossing rate over equal windows.

    ``series`` is ``[B, T, E]``; the result is ``[B, E, 3 * n_windows]``.
    Zero crossings are counted on the window after removing its mean, so a
    rectified envelope still yields a usable oscillation measure.
    """
    b, t, e = series.shape
    w = t // n_windows
    chunks = series[:, : w * n_windows, :].reshape(b, n_windows, w, e)
    mav = np.abs(chunks).mean(axis=2)
    rms = np.sqrt((chunks**2).mean(axis=2))
    centered = chunks - chunks.mean(axis=2, keepdims=True)
    signs = np.sign(centered)
    crossings = (np.abs(np.diff(signs, axis=2)) > 1).sum(axis=2) / max(w - 1, 1)
    feats = np.stack([mav, rms, crossings], axis=-1)  # [B, W, E, 3]
    return feats.transpose(0, 2, 1, 3).reshape(b, e, 3 * n_windows)


class GraphAttentionLayer:
    def __init__(self, rng, n_in: int, n_out: int, name: str):
        self.w = Linear(rng, n_in, n_out, f"{name}.w", bias=False)
        self.a_src = uniform_fan_in(rng, (n_out, 1), fan_in=n_out)
        self.a_dst = uniform_fan_in(rng, (n_out, 1), fan_in=n_out)
        self.bias = zeros(n_out, requires_grad=True)
        self.name = name

    def __call__(self, h, mask_add: np.ndarray, collect: list | None = None):
        hw = self.w(h)  # [B, E, F]
        src = hw @ self.a_src  # [B, E, 1]
        dst = hw @ self.a_dst
        scores = leaky_relu(src + dst.transpose((0, 2, 1)), LEAKY_SLOPE)
        scores = scores + Tensor(mask_add)
        attn = softmax(scores, axis=-1)  # rows sum to 1 over each node's neighbourhood
        if collect is not None:
            collect.append(attn.data)
        return (attn @ hw) + self.bias

    def parameters(self):
        return self.w.parameters() + [
            (f"{self.name}.a_src", self.a_src),
            (f"{self.name}.a_dst", self.a_dst),
            (f"{self.name}.bias", self.bias),
        ]


class EmgEncoder:
    def __init__(self, rng, n_electrodes: int = 8, n_windows: int = 4, dim: int = 32):
        self.n_electrodes = n_electrodes
        self.n_windows = n_windows
        n_feats = 3 * n_windows
        self.gat1 = GraphAttentionLayer(rng, n_feats, dim, "emg.gat1")
        self.gat2 = GraphAttentionLayer(rng, dim, dim, "emg.gat2")

    def __call__(self, series: np.ndarray, adjacency: np.ndarray, collect: list | None = None) -> Tensor:
        series = np.asarray(series, dtype=np.float64)
        validate_adjacency(adjacency, series.shape[-1])
        mask_add = np.where(np.asarray(adjacency, dtype=bool), 0.0, MASK_OFF)
        feats = emg_node_features(series, self.n_windows)
        h = relu(self.gat1(Tensor(feats), mask_add, collect=collect))
        h = self.gat2(h, mask_add, collect=collect)
        return h.mean(axis=1)

    def parameters(self):
        return self.gat1.parameters() + self.gat2.parameters()


# ---------------------------------------------------------------------------
# single-sample entry points


def encode_visual(inp: VisualInput, encoder: VisualEncoder) -> ModalEmbedding:
    out = encoder(inp.frame[None, :, :])
    return ModalEmbedding(vector=out.data[0].copy(), modality="visual")


def encode_accel(inp: AccelInput, encoder: AccelEncoder) -> ModalEmbedding:
    out = encoder(inp.series[None, :, :])
    return ModalEmbedding(vector=out.data[0].copy(), modality="accel")


def encode_emg(inp: EmgInput, encoder: EmgEncoder) -> ModalEmbedding:
    out = encoder(inp.series[None, :, :], inp.adjacency)
    return ModalEmbedding(vector=out.data[0].copy(), modality="emg")
