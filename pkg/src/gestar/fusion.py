"""Weighted fusion of modality embeddings and the gesture classifier head.

The three raw fusion weights are unconstrained parameters; the effective
weights are their softmax, so they always form a convex combination. The
classifier is a single linear layer over the fused feature; training uses
cross-entropy on its logits.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .encoders import Linear
from .errors import ShapeError
from .tensor import Tensor, as_tensor, log_softmax, softmax, zeros

N_CLASSES = 15


@dataclass
class GestureFeature:
    vector: np.ndarray


class FusionWeights:
    """Learned raw weights, one per modality; effective weights softmax to 1."""

    def __init__(self, n_modalities: int = 3):
        self.raw = zeros(n_modalities, requires_grad=True)

    @property
    def n_modalities(self) -> int:
        return self.raw.size

    def effective(self) -> Tensor:
        return softmax(self.raw, axis=-1)

    def effective_values(self) -> np.ndarray:
        return self.effective().data.copy()

    def parameters(self):
        return [("fusion.raw_weights", self.raw)]


def fuse_embeddings(embeddings: list, weights: FusionWeights) -> Tensor:
    """Convex combination of same-length embeddings ([B, d] or [d] each)."""
    if len(embeddings) != weights.n_modalities:
        raise ShapeError(
            f"{len(embeddings)} embeddings but {weights.n_modalities} fusion weights"
        )
    tensors = [as_tensor(e) for e in embeddings]
    dim = tensors[0].shape[-1]
    for t in tensors[1:]:
        if t.shape[-1] != dim:
            raise ShapeError(f"embedding dimensions disagree: {tensors[0].shape} vs {t.shape}")
    eff = weights.effective()
    picks = np.eye(weights.n_modalities)
    fused = None
    for i, t in enumerate(tensors):
        w_i = (eff * picks[i]).sum()  # scalar slice of the softmax output
        term = t * w_i
        fused = term if fused is None else fused + term
    return fused


def fuse(v, a, e, weights: FusionWeights) -> GestureFeature:
    """Three-modality fusion over single embeddings; returns the fused feature."""
    vecs = [m.vector if hasattr(m, "vector") else m for m in (v, a, e)]
    out = fuse_embeddings([np.asarray(x, dtype=np.float64) for x in vecs], weights)
    return GestureFeature(vector=out.data.copy())


class Classifier:
    def __init__(self, rng, dim: int = 32, n_classes: int = N_CLASSES):
        self.n_classes = n_classes
        self.head = Linear(rng, dim, n_classes, "classifier.head")

    def logits(self, features) -> Tensor:
        return self.head(features)

    def probabilities(self, features) -> Tensor:
        return softmax(self.logits(features), axis=-1)

    def parameters(self):
        return self.head.parameters()


def cross_entropy(logits: Tensor, labels: np.ndarray, class_weights: np.ndarray | None = None) -> Tensor:
    """Mean cross-entropy of integer labels against logits [B, C]."""
    labels = np.asarray(labels, dtype=np.int64)
    b, c = logits.shape
    onehot = np.zeros((b, c))
    onehot[np.arange(b), labels] = 1.0
    if class_weights is not None:
        onehot *= np.asarray(class_weights, dtype=np.float64)[labels][:, None]
    logp = log_softmax(logits, axis=-1)
    return -(logp * onehot).sum() / float(b)
