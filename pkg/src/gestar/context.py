"""Context encoding and feature-wise conditioning of the fused gesture feature.

Scalar context channels (lighting, fatigue, optional extras) are treated as
tokens: each value is embedded through one shared scalar-to-vector map, a
learned positional embedding distinguishes channels, and a single
self-attention block mixes them before mean-pooling. The conditioner applies
a scale-and-shift ``x * (1 + s(c)) + t(c)`` whose maps start at zero, so a
freshly initialized conditioner is exactly the identity.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .encoders import Linear, TransformerBlock
from .errors import ValidationError
from .tensor import Tensor, as_tensor, uniform_fan_in


@dataclass
class ContextInput:
    lighting: float
    fatigue: float
    extra: tuple[float, ...] = ()

    def __post_init__(self):
        if not 0.0 <= self.lighting <= 1.0:
            raise ValidationError(f"lighting must be in [0, 1], got {self.lighting}")
        if not 0.0 <= self.fatigue <= 1.0:
            raise ValidationError(f"fatigue must be in [0, 1], got {self.fatigue}")

    def as_array(self) -> np.ndarray:
        return np.asarray([self.lighting, self.fatigue, *self.extra], dtype=np.float64)


@dataclass
class ContextEmbedding:
    vector: np.ndarray


class ContextEncoder:
    def __init__(
        self,
        rng,
        n_channels: int = 2,
        token_dim: int = 8,
        out_dim: int = 8,
        n_heads: int = 2,
        ffn_hidden: int = 16,
        bias: bool = True,
    ):
        self.n_channels = n_channels
        # one shared scalar-to-vector embedding; channels differ only via pos_emb
        self.token_w = uniform_fan_in(rng, (1, token_dim), fan_in=1)
        self.pos_emb = uniform_fan_in(rng, (n_channels, token_dim), fan_in=token_dim)
        self.block = TransformerBlock(rng, token_dim, n_heads, ffn_hidden, "context.block")
        self.final = Linear(rng, token_dim, out_dim, "context.final", bias=bias)

    def __call__(self, channels: np.ndarray, collect: list | None = None) -> Tensor:
        channels = np.asarray(channels, dtype=np.float64)
        if channels.ndim == 1:
            channels = channels[None, :]
        if channels.shape[1] != self.n_channels:
            raise ValidationError(
                f"expected {self.n_channels} context channels, got {channels.shape[1]}"
            )
        if channels.min() < 0.0 or channels.max() > 1.0:
            raise ValidationError("context channels must lie in [0, 1]")
        tokens = Tensor(channels[:, :, None]) @ self.token_w  # [B, C, token_dim]
        x = tokens + self.pos_emb
        x = self.block(x, collect=collect)
        return self.final(x.mean(axis=1))

    def parameters(self):
        out = [("context.token_w", self.token_w), ("context.pos_emb", self.pos_emb)]
        out.extend(self.block.parameters())
        out.extend(self.final.parameters())
        return out


class ContextConditioner:
    """Feature-wise scale-and-shift from the context embedding; identity at init."""

    def __init__(self, ctx_dim: int = 8, feature_dim: int = 32):
        rng_unused = None  # zero-initialized maps need no randomness
        self.scale = Linear(rng_unused, ctx_dim, feature_dim, "refine.scale", zero_init=True)
        self.shift = Linear(rng_unused, ctx_dim, feature_dim, "refine.shift", zero_init=True)

    def __call__(self, features, ctx_embedding) -> Tensor:
        features = as_tensor(features)
        s = self.scale(ctx_embedding)
        t = self.shift(ctx_embedding)
        return features * (s + 1.0) + t

    def parameters(self):
        return self.scale.parameters() + self.shift.parameters()


def encode_context(inp: ContextInput, encoder: ContextEncoder) -> ContextEmbedding:
    out = encoder(inp.as_array()[None, :])
    return ContextEmbedding(vector=out.data[0].copy())


def refine(feature, ctx: ContextEmbedding, conditioner: ContextConditioner):
    vec = feature.vector if hasattr(feature, "vector") else np.asarray(feature)
    out = conditioner(Tensor(vec[None, :]), Tensor(ctx.vector[None, :]))
    from .fusion import GestureFeature

    return GestureFeature(vector=out.data[0].copy())
