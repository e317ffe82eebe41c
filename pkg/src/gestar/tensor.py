"""Dense float64 tensors with reverse-mode automatic differentiation.

Gradients are recorded on an explicit :class:`Tape`: every primitive op
executed inside a ``with Tape() as tape:`` block appends one entry, and
``tape.backward(loss)`` replays the entries exactly once in reverse order.
Accumulation order is fixed by execution order, which keeps backward passes
bit-reproducible for a given program. The active tape is thread-local, so
independent training loops can run in parallel threads without sharing
state.

Everything is float64 end to end; these models are tiny and reproducibility
matters more than speed.
"""

from __future__ import annotations

import math
import threading
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import ParameterError, ShapeError, TapeError

_local = threading.local()


def _tape_stack() -> list:
    stack = getattr(_local, "stack", None)
    if stack is None:
        stack = []
        _local.stack = stack
    return stack


def active_tape() -> "Tape | None":
    stack = _tape_stack()
    return stack[-1] if stack else None


class Tensor:
    """A dense float64 array plus an optional gradient of the same shape."""

    __slots__ = ("data", "grad", "requires_grad", "name")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        arr = np.asarray(data, dtype=np.float64)
        if not np.all(np.isfinite(arr)):
            raise ParameterError("tensor data must be finite")
        self.data = arr
        self.grad: np.ndarray | None = None
        self.requires_grad = bool(requires_grad)
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{tag}, requires_grad={self.requires_grad})"

    # arithmetic sugar; all routed through the module-level ops
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)

    def __pow__(self, p):
        return power(self, p)

    def __matmul__(self, other):
        return matmul(self, other)

    def sum(self, axis=None, keepdims: bool = False):
        return tensor_sum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims: bool = False):
        return tensor_mean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, *axes):
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return transpose(self, axes)


class Tape:
    """Ordered record of primitive ops; replayed once, in reverse, by backward."""

    def __init__(self):
        self._entries: list[tuple[Tensor, tuple, Callable]] = []
        self._consumed = False

    def __enter__(self) -> "Tape":
        _tape_stack().append(self)
        return self

    def __exit__(self, exc_type, exc, tb) -> bool:
        _tape_stack().pop()
        return False

    def __len__(self) -> int:
        return len(self._entries)

    def backward(self, loss: Tensor) -> None:
        """Accumulate dLoss/dX into ``.grad`` of every tensor reaching loss."""
        if self._consumed:
            raise TapeError("tape already consumed by a previous backward pass")
        if loss.size != 1:
            raise ShapeError(f"backward requires a scalar loss, got shape {loss.shape}")
        self._consumed = True
        loss.grad = np.ones_like(loss.data)
        for out, inputs, vjp in reversed(self._entries):
            g = out.grad
            if g is None:
                continue
            grads = vjp(g)
            for tensor, gi in zip(inputs, grads):
                if gi is None:
                    continue
                if tensor.grad is None:
                    tensor.grad = gi
                else:
                    tensor.grad = tensor.grad + gi


def backward(loss: Tensor, tape: Tape) -> None:
    tape.backward(loss)


def as_tensor(x) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=np.float64))


def _result(data: np.ndarray, inputs: tuple[Tensor, ...], vjp: Callable) -> Tensor:
    out = Tensor.__new__(Tensor)
    out.data = data
    out.grad = None
    out.name = None
    out.requires_grad = any(t.requires_grad for t in inputs)
    tape = active_tape()
    if tape is not None and out.requires_grad:
        tape._entries.append((out, inputs, vjp))
    return out


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum a broadcasted gradient back down to ``shape``."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


# ---------------------------------------------------------------------------
# elementwise ops


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    data = a.data + b.data
    na, nb = a.requires_grad, b.requires_grad

    def vjp(g):
        return (
            _unbroadcast(g, a.shape) if na else None,
            _unbroadcast(g, b.shape) if nb else None,
        )

    return _result(data, (a, b), vjp)


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    data = a.data - b.data
    na, nb = a.requires_grad, b.requires_grad

    def vjp(g):
        return (
            _unbroadcast(g, a.shape) if na else None,
            _unbroadcast(-g, b.shape) if nb else None,
        )

    return _result(data, (a, b), vjp)


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    data = a.data * b.data
    na, nb = a.requires_grad, b.requires_grad

    def vjp(g):
        return (
            _unbroadcast(g * b.data, a.shape) if na else None,
            _unbroadcast(g * a.data, b.shape) if nb else None,
        )

    return _result(data, (a, b), vjp)


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    data = a.data / b.data
    na, nb = a.requires_grad, b.requires_grad

    def vjp(g):
        ga = _unbroadcast(g / b.data, a.shape) if na else None
        gb = _unbroadcast(-g * a.data / (b.data * b.data), b.shape) if nb else None
        return ga, gb

    return _result(data, (a, b), vjp)


def neg(a) -> Tensor:
    a = as_tensor(a)

    def vjp(g):
        return (-g,)

    return _result(-a.data, (a,), vjp)


def power(a, p: float) -> Tensor:
    a = as_tensor(a)
    p = float(p)
    data = a.data**p

    def vjp(g):
        return (g * p * a.data ** (p - 1.0),)

    return _result(data, (a,), vjp)


def exp(a) -> Tensor:
    a = as_tensor(a)
    data = np.exp(a.data)

    def vjp(g):
        return (g * data,)

    return _result(data, (a,), vjp)


def log(a) -> Tensor:
    a = as_tensor(a)
    data = np.log(a.data)

    def vjp(g):
        return (g / a.data,)

    return _result(data, (a,), vjp)


def tanh(a) -> Tensor:
    a = as_tensor(a)
    data = np.tanh(a.data)

    def vjp(g):
        return (g * (1.0 - data * data),)

    return _result(data, (a,), vjp)


def relu(a) -> Tensor:
    a = as_tensor(a)
    mask = a.data > 0

    def vjp(g):
        return (g * mask,)

    return _result(np.where(mask, a.data, 0.0), (a,), vjp)


def leaky_relu(a, slope: float = 0.2) -> Tensor:
    a = as_tensor(a)
    mask = a.data > 0
    data = np.where(mask, a.data, slope * a.data)

    def vjp(g):
        return (g * np.where(mask, 1.0, slope),)

    return _result(data, (a,), vjp)


# ---------------------------------------------------------------------------
# reductions and shape ops


def _expand_reduced(g: np.ndarray, shape: tuple[int, ...], axis, keepdims: bool) -> np.ndarray:
    if axis is None:
        return np.broadcast_to(np.asarray(g).reshape((1,) * len(shape)), shape)
    axes = axis if isinstance(axis, tuple) else (axis,)
    axes = tuple(a % len(shape) for a in axes)
    if not keepdims:
        g = np.expand_dims(g, axes)
    return np.broadcast_to(g, shape)


def tensor_sum(a, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    data = a.data.sum(axis=axis, keepdims=keepdims)

    def vjp(g):
        return (_expand_reduced(g, a.shape, axis, keepdims),)

    return _result(np.asarray(data), (a,), vjp)


def tensor_mean(a, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    data = a.data.mean(axis=axis, keepdims=keepdims)
    count = a.data.size / max(data.size, 1)

    def vjp(g):
        return (_expand_reduced(g, a.shape, axis, keepdims) / count,)

    return _result(np.asarray(data), (a,), vjp)


def reshape(a, shape) -> Tensor:
    a = as_tensor(a)
    data = a.data.reshape(shape)

    def vjp(g):
        return (g.reshape(a.shape),)

    return _result(data, (a,), vjp)


def transpose(a, axes) -> Tensor:
    a = as_tensor(a)
    axes = tuple(axes)
    inverse = tuple(np.argsort(axes))
    data = a.data.transpose(axes)

    def vjp(g):
        return (g.transpose(inverse),)

    return _result(data, (a,), vjp)


# ---------------------------------------------------------------------------
# linear algebra and structured ops


def matmul(a, b) -> Tensor:
    """Matrix product; batched over any leading dimensions."""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeError(f"matmul needs 2-D or higher operands, got {a.shape} x {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul inner dimensions disagree: {a.shape} x {b.shape}")
    data = np.matmul(a.data, b.data)
    na, nb = a.requires_grad, b.requires_grad

    def vjp(g):
        ga = _unbroadcast(np.matmul(g, np.swapaxes(b.data, -1, -2)), a.shape) if na else None
        gb = _unbroadcast(np.matmul(np.swapaxes(a.data, -1, -2), g), b.shape) if nb else None
        return ga, gb

    return _result(data, (a, b), vjp)


def softmax(a, axis: int = -1) -> Tensor:
    """Stable softmax along ``axis``; each slice sums to one."""
    a = as_tensor(a)
    data = a.data - a.data.max(axis=axis, keepdims=True)
    np.exp(data, out=data)
    data /= data.sum(axis=axis, keepdims=True)
    data.flags.writeable = False

    def vjp(g):
        gd = g * data
        dot = gd.sum(axis=axis, keepdims=True)
        gd -= dot * data
        return (gd,)

    return _result(data, (a,), vjp)


def log_softmax(a, axis: int = -1) -> Tensor:
    a = as_tensor(a)
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
    data = shifted - lse

    def vjp(g):
        return (g - np.exp(data) * g.sum(axis=axis, keepdims=True),)

    return _result(data, (a,), vjp)


def conv1d_dilated(x, kernel, dilation: int = 1) -> Tensor:
    """Causal dilated 1-D convolution.

    ``x`` is ``[T, C_in]`` or ``[B, T, C_in]``; ``kernel`` is
    ``[K, C_in, C_out]``. The input is left-padded with zeros by
    ``(K - 1) * dilation`` samples so the output has the same length and
    position ``t`` depends only on inputs at positions ``<= t``. Tap
    ``K - 1`` multiplies the current sample.
    """
    x, kernel = as_tensor(x), as_tensor(kernel)
    dilation = int(dilation)
    if dilation < 1:
        raise ParameterError(f"dilation must be >= 1, got {dilation}")
    if kernel.ndim != 3:
        raise ShapeError(f"kernel must be [K, C_in, C_out], got {kernel.shape}")
    squeeze = x.ndim == 2
    xd = x.data[None, :, :] if squeeze else x.data
    if xd.ndim != 3:
        raise ShapeError(f"input must be [T, C_in] or [B, T, C_in], got {x.shape}")
    k_taps, c_in, c_out = kernel.shape
    if xd.shape[-1] != c_in:
        raise ShapeError(f"channel mismatch: input {x.shape} vs kernel {kernel.shape}")
    t_len = xd.shape[1]
    pad = (k_taps - 1) * dilation
    xp = np.pad(xd, ((0, 0), (pad, 0), (0, 0)))
    out = np.zeros((xd.shape[0], t_len, c_out))
    for k in range(k_taps):
        out += np.matmul(xp[:, k * dilation : k * dilation + t_len, :], kernel.data[k])
    data = out[0] if squeeze else out

    nx, nk = x.requires_grad, kernel.requires_grad

    def vjp(g):
        gb = g[None, :, :] if squeeze else g
        g_flat = gb.reshape(-1, c_out)
        gk = np.empty((k_taps, c_in, c_out)) if nk else None
        gxp = np.zeros_like(xp) if nx else None
        for k in range(k_taps):
            if nk:
                sl = xp[:, k * dilation : k * dilation + t_len, :]
                gk[k] = sl.reshape(-1, c_in).T @ g_flat
            if nx:
                gxp[:, k * dilation : k * dilation + t_len, :] += np.matmul(gb, kernel.data[k].T)
        if not nx:
            return None, gk
        gx = gxp[:, pad:, :]
        return (gx[0] if squeeze else gx), gk

    return _result(data, (x, kernel), vjp)


def affine(x, w, b=None) -> Tensor:
    """``x @ w + b`` as one tape entry; ``x`` may carry leading batch axes."""
    x, w = as_tensor(x), as_tensor(w)
    if x.shape[-1] != w.shape[-2]:
        raise ShapeError(f"affine inner dimensions disagree: {x.shape} x {w.shape}")
    b = as_tensor(b) if b is not None else None
    data = np.matmul(x.data, w.data)
    if b is not None:
        data += b.data
    nx, nw = x.requires_grad, w.requires_grad
    nb = b.requires_grad if b is not None else False
    inputs = (x, w) if b is None else (x, w, b)

    def vjp(g):
        gx = np.matmul(g, w.data.T) if nx else None
        gw = None
        if nw:
            gw = x.data.reshape(-1, x.shape[-1]).T @ g.reshape(-1, g.shape[-1])
        out = [gx, gw]
        if b is not None:
            out.append(_unbroadcast(g, b.shape) if nb else None)
        return out

    return _result(data, inputs, vjp)


def self_attention(x, wq, bq, wk, bk, wv, bv, wo, bo, n_heads: int, collect: list | None = None) -> Tensor:
    """Multi-head scaled dot-product self-attention as a single tape entry.

    ``x`` is ``[B, P, D]``; the four projections are ``[D, D]`` with ``[D]``
    biases. Row-stochastic attention weights (softmax over the last axis)
    are appended to ``collect`` when given.
    """
    tensors = [as_tensor(t) for t in (x, wq, bq, wk, bk, wv, bv, wo, bo)]
    x, wq, bq, wk, bk, wv, bv, wo, bo = tensors
    b_sz, p, d = x.shape
    if d % n_heads != 0:
        raise ShapeError(f"model dim {d} not divisible by {n_heads} heads")
    dk = d // n_heads
    scale = 1.0 / np.sqrt(dk)

    def split(m):
        return np.ascontiguousarray(m.reshape(b_sz, p, n_heads, dk).transpose(0, 2, 1, 3))

    q = split((np.matmul(x.data, wq.data) + bq.data) * scale)
    k = split(np.matmul(x.data, wk.data) + bk.data)
    v = split(np.matmul(x.data, wv.data) + bv.data)
    scores = np.matmul(q, k.transpose(0, 1, 3, 2))
    scores -= scores.max(axis=-1, keepdims=True)
    np.exp(scores, out=scores)
    scores /= scores.sum(axis=-1, keepdims=True)
    attn = scores  # [B, H, P, P]
    if collect is not None:
        collect.append(attn.copy())
    mixed = np.matmul(attn, v).transpose(0, 2, 1, 3).reshape(b_sz, p, d)
    data = np.matmul(mixed, wo.data) + bo.data
    needs = [t.requires_grad for t in tensors]

    def vjp(g):
        g2 = g.reshape(-1, d)
        g_wo = mixed.reshape(-1, d).T @ g2 if needs[7] else None
        g_bo = g2.sum(axis=0) if needs[8] else None
        gm = np.matmul(g, wo.data.T)  # [B, P, D]
        gm = np.ascontiguousarray(gm.reshape(b_sz, p, n_heads, dk).transpose(0, 2, 1, 3))
        g_attn = np.matmul(gm, v.transpose(0, 1, 3, 2))
        gv = np.matmul(attn.transpose(0, 1, 3, 2), gm)
        # softmax adjoint, in place on g_attn
        dot = (g_attn * attn).sum(axis=-1, keepdims=True)
        g_attn *= attn
        g_attn -= dot * attn
        gq = np.matmul(g_attn, k) * scale
        gk = np.matmul(g_attn.transpose(0, 1, 3, 2), q)

        def merge(m):
            return np.ascontiguousarray(m.transpose(0, 2, 1, 3).reshape(b_sz, p, d))

        gq, gk, gv = merge(gq), merge(gk), merge(gv)
        x_flat = x.data.reshape(-1, d)
        out = [None] * 9
        if needs[0]:
            gx = np.matmul(gq, wq.data.T)
            gx += np.matmul(gk, wk.data.T)
            gx += np.matmul(gv, wv.data.T)
            out[0] = gx
        for slot, gi in ((1, gq), (3, gk), (5, gv)):
            if needs[slot]:
                out[slot] = x_flat.T @ gi.reshape(-1, d)
            if needs[slot + 1]:
                out[slot + 1] = gi.reshape(-1, d).sum(axis=0)
        out[7], out[8] = g_wo, g_bo
        return out

    return _result(data, tuple(tensors), vjp)


def layer_norm(x, gain, bias, eps: float = 1e-5) -> Tensor:
    """Normalize the last axis to zero mean and unit variance, then affine."""
    x, gain, bias = as_tensor(x), as_tensor(gain), as_tensor(bias)
    mu = x.data.mean(axis=-1, keepdims=True)
    centered = x.data - mu
    var = (centered * centered).mean(axis=-1, keepdims=True)
    inv_sigma = 1.0 / np.sqrt(var + eps)
    x_hat = centered * inv_sigma
    data = x_hat * gain.data + bias.data
    nx, ng, nb = x.requires_grad, gain.requires_grad, bias.requires_grad

    def vjp(g):
        reduce_axes = tuple(range(g.ndim - 1))
        gg = (g * x_hat).sum(axis=reduce_axes) if ng else None
        gb = g.sum(axis=reduce_axes) if nb else None
        if nx:
            gy = g * gain.data
            gx = inv_sigma * (
                gy
                - gy.mean(axis=-1, keepdims=True)
                - x_hat * (gy * x_hat).mean(axis=-1, keepdims=True)
            )
        else:
            gx = None
        return gx, gg, gb

    return _result(data, (x, gain, bias), vjp)


def dropout(a, rate: float, rng: np.random.Generator) -> Tensor:
    """Inverted dropout with a seeded mask; identity when rate is 0."""
    if not 0.0 <= rate < 1.0:
        raise ParameterError(f"dropout rate must be in [0, 1), got {rate}")
    if rate == 0.0:
        return as_tensor(a)
    a = as_tensor(a)
    mask = (rng.random(a.shape) >= rate) / (1.0 - rate)

    def vjp(g):
        return (g * mask,)

    return _result(a.data * mask, (a,), vjp)


# ---------------------------------------------------------------------------
# parameter helpers


def uniform_fan_in(rng: np.random.Generator, shape: Sequence[int], fan_in: int | None = None) -> Tensor:
    """Weights drawn uniformly from +-sqrt(1/fan_in)."""
    shape = tuple(int(s) for s in shape)
    if fan_in is None:
        fan_in = shape[0] if len(shape) > 1 else max(shape[0], 1)
    bound = math.sqrt(1.0 / max(int(fan_in), 1))
    return Tensor(rng.uniform(-bound, bound, size=shape), requires_grad=True)


def zeros(shape, requires_grad: bool = False) -> Tensor:
    return Tensor(np.zeros(shape), requires_grad=requires_grad)


def flatten_params(params: Iterable[Tensor]) -> np.ndarray:
    return np.concatenate([p.data.reshape(-1) for p in params]) if params else np.zeros(0)
