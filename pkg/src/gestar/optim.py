"""First-order optimizers over flat parameter vectors.

Plain SGD is the default everywhere; the update is exactly ``p - lr * g``
so training runs are bit-reproducible. An adaptive-moment variant is
available behind the ``kind`` switch for experiments that want it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError, ShapeError


@dataclass
class OptimizerState:
    kind: str
    lr: float
    m: np.ndarray
    v: np.ndarray
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if self.kind not in ("sgd", "adam"):
            raise ParameterError(f"unknown optimizer kind {self.kind!r}")
        if not self.lr >= 0.0:
            raise ParameterError(f"learning rate must be >= 0, got {self.lr}")
        if self.m.shape != self.v.shape:
            raise ShapeError("moment accumulators must have equal length")


def make_optimizer_state(kind: str, lr: float, n_params: int) -> OptimizerState:
    return OptimizerState(kind=kind, lr=float(lr), m=np.zeros(n_params), v=np.zeros(n_params))


def optimizer_step(params: np.ndarray, grads: np.ndarray, state: OptimizerState) -> np.ndarray:
    """One update; returns the new parameter vector and advances the state."""
    if params.shape != grads.shape:
        raise ShapeError(f"params/grads length mismatch: {params.shape} vs {grads.shape}")
    if params.shape != state.m.shape:
        raise ShapeError(f"optimizer state sized {state.m.shape} but params are {params.shape}")
    state.step += 1
    if state.kind == "sgd":
        return params - state.lr * grads
    # adam with standard bias correction
    state.m = state.beta1 * state.m + (1.0 - state.beta1) * grads
    state.v = state.beta2 * state.v + (1.0 - state.beta2) * grads * grads
    m_hat = state.m / (1.0 - state.beta1**state.step)
    v_hat = state.v / (1.0 - state.beta2**state.step)
    return params - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
