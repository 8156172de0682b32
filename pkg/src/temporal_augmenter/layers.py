"""Feed-forward layers with matching analytic backward passes.

Every layer comes as a ``*_forward`` / ``*_backward`` pair.  Forward returns
``(y, cache)``; backward consumes the cache produced by the immediately
preceding forward together with the gradient of the loss w.r.t. ``y``.
All caches are plain tuples documented next to the forward function.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor_core import Rng, ShapeError, Tensor


@dataclass
class DenseParams:
    """Affine layer weights: W is [in, out], b is [out]."""
    W: Tensor
    b: Tensor

    @property
    def in_size(self) -> int:
        return self.W.shape[0]

    @property
    def out_size(self) -> int:
        return self.W.shape[1]


@dataclass
class Conv1DParams:
    """1-D convolution weights: K is [kernel_size, in_channels, filters], b is [filters]."""
    K: Tensor
    b: Tensor

    @property
    def kernel_size(self) -> int:
        return self.K.shape[0]

    @property
    def in_channels(self) -> int:
        return self.K.shape[1]

    @property
    def filters(self) -> int:
        return self.K.shape[2]


# ---------------------------------------------------------------------------
# dense
# ---------------------------------------------------------------------------

def dense_forward(x: Tensor, p: DenseParams):
    """y = x @ W + b for x of shape [n, in].

    cache = (x, p).
    """
    if x.ndim != 2 or x.shape[1] != p.in_size:
        raise ShapeError(f"dense input {x.shape} incompatible with W {p.W.shape}")
    return x @ p.W + p.b, (x, p)


def dense_backward(cache, dy: Tensor):
    """Return (dx, dW, db) given dL/dy."""
    x, p = cache
    dx = dy @ p.W.T
    dW = x.T @ dy
    db = dy.sum(axis=0)
    return dx, dW, db


# ---------------------------------------------------------------------------
# 1-D convolution (valid padding, stride 1)
# ---------------------------------------------------------------------------

def conv1d_forward(x: Tensor, p: Conv1DParams):
    """Sliding dot product over time: x [n, T, in_ch] -> y [n, T-k+1, filters].

    With kernel_size 1 this reduces exactly to a per-timestep dense map.
    cache = (x, p).
    """
    if x.ndim != 3 or x.shape[2] != p.in_channels:
        raise ShapeError(f"conv1d input {x.shape} incompatible with kernel {p.K.shape}")
    n, T, _ = x.shape
    k = p.kernel_size
    if T < k:
        raise ShapeError(f"conv1d needs T >= kernel_size, got T={T}, kernel_size={k}")
    T_out = T - k + 1
    y = np.broadcast_to(p.b, (n, T_out, p.filters)).copy()
    for j in range(k):
        y += x[:, j:j + T_out, :] @ p.K[j]
    return y, (x, p)


def conv1d_backward(cache, dy: Tensor):
    """Return (dx, dK, db) given dL/dy of shape [n, T_out, filters]."""
    x, p = cache
    k = p.kernel_size
    T_out = dy.shape[1]
    dx = np.zeros_like(x)
    dK = np.zeros_like(p.K)
    for j in range(k):
        dK[j] = np.tensordot(x[:, j:j + T_out, :], dy, axes=([0, 1], [0, 1]))
        dx[:, j:j + T_out, :] += dy @ p.K[j].T
    db = dy.sum(axis=(0, 1))
    return dx, dK, db


# ---------------------------------------------------------------------------
# max pooling over time
# ---------------------------------------------------------------------------

def maxpool1d_forward(x: Tensor, pool: int):
    """Non-overlapping window max over time; trailing remainder steps dropped.

    x [n, T, c] -> y [n, T // pool, c];  cache = (x.shape, arg, pool) where
    arg holds the in-window argmax (first index on ties).
    """
    if pool < 1:
        raise ValueError(f"pool must be >= 1, got {pool}")
    n, T, c = x.shape
    if pool > T:
        raise ShapeError(f"pool window {pool} exceeds sequence length {T}")
    T_out = T // pool
    windows = x[:, :T_out * pool, :].reshape(n, T_out, pool, c)
    arg = windows.argmax(axis=2)
    y = np.take_along_axis(windows, arg[:, :, None, :], axis=2)[:, :, 0, :]
    return y, (x.shape, arg, pool)


def maxpool1d_backward(cache, dy: Tensor):
    """Route dL/dy to each window's argmax position, zeros elsewhere."""
    shape, arg, pool = cache
    n, T, c = shape
    T_out = arg.shape[1]
    dx = np.zeros(shape, dtype=np.float64)
    t_idx = np.arange(T_out)[None, :, None] * pool + arg
    dx[np.arange(n)[:, None, None], t_idx, np.arange(c)[None, None, :]] = dy
    return dx


# ---------------------------------------------------------------------------
# dropout (inverted) and ReLU
# ---------------------------------------------------------------------------

def dropout_forward(x: Tensor, rate: float, mode: str, rng: Rng | None = None):
    """Inverted dropout: keep with probability 1-rate, scale kept values by 1/(1-rate).

    Eval mode and rate 0 are the identity and consume no rng draws.
    cache = (keep_mask | None, scale).
    """
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    if mode not in ("train", "eval"):
        raise ValueError(f"mode must be 'train' or 'eval', got {mode!r}")
    if mode == "eval" or rate == 0.0:
        return x, (None, 1.0)
    if rng is None:
        raise ValueError("train-mode dropout with rate > 0 requires an rng")
    keep = rng.uniform(x.shape) >= rate
    scale = 1.0 / (1.0 - rate)
    return x * keep * scale, (keep, scale)


def dropout_backward(cache, dy: Tensor):
    keep, scale = cache
    if keep is None:
        return dy
    return dy * keep * scale


def relu_forward(x: Tensor):
    """y = max(0, x); cache is the strict positive mask (gradient 0 at x == 0)."""
    return np.maximum(x, 0.0), x > 0


def relu_backward(mask, dy: Tensor):
    return dy * mask
