"""Shared test helpers: finite-difference probing and brute-force oracles."""

from __future__ import annotations

import numpy as np

from gestar.model import Batch, GestureModel
from gestar.tensor import Tape


def central_difference(f, vec: np.ndarray, index: int, h: float = 1e-5) -> float:
    vp = vec.copy()
    vp[index] += h
    vm = vec.copy()
    vm[index] -= h
    return (f(vp) - f(vm)) / (2.0 * h)


def grad_close(analytic: float, numeric: float, rel_tol: float = 1e-4, abs_floor: float = 1e-8) -> bool:
    if abs(analytic) < abs_floor:
        return abs(numeric - analytic) < 1e-6
    return abs(numeric - analytic) / max(abs(analytic), abs(numeric)) < rel_tol


def probe_gradients(loss_fn, vec: np.ndarray, grad: np.ndarray, indices, h: float = 1e-5):
    """Assert analytic gradients at the given flat indices against central differences."""
    for i in indices:
        numeric = central_difference(loss_fn, vec, int(i), h)
        assert grad_close(grad[int(i)], numeric), (
            f"gradient mismatch at coord {i}: analytic {grad[int(i)]:.6e} vs numeric {numeric:.6e}"
        )


def random_batch(rng: np.random.Generator, model: GestureModel, size: int = 4) -> Batch:
    cfg = model.config
    return Batch(
        frames=rng.random((size, cfg.frame_size, cfg.frame_size)),
        accel=rng.normal(0.0, 0.5, size=(size, 64, cfg.accel_channels)),
        emg=rng.random((size, 64, cfg.n_electrodes)),
        adjacency=model.default_adjacency(),
        context=rng.random((size, cfg.ctx_channels)),
        labels=rng.integers(0, cfg.n_classes, size),
    )


def model_grad(model: GestureModel, batch: Batch):
    with Tape() as tape:
        loss = model.loss(batch)
    tape.backward(loss)
    grad = model.gradient_vector()
    model.zero_grad()
    return grad


# brute-force macro F1 used as an independent oracle in several modules
def brute_force_macro_f1(counts: np.ndarray) -> float:
    counts = np.asarray(counts, dtype=np.int64)
    n = counts.shape[0]
    f1s = []
    for c in range(n):
        tp = counts[c, c]
        fp = sum(counts[r, c] for r in range(n)) - tp
        fn = sum(counts[c, r] for r in range(n)) - tp
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        f1s.append(2 * precision * recall / (precision + recall) if precision + recall else 0.0)
    return float(np.mean(f1s))
