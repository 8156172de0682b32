"""Dense float64 tensor kernels, seeded RNG, and weight initializers.

Tensors throughout the package are plain numpy ``float64`` ndarrays in
row-major (C) order.  Everything here is a pure function of its inputs;
the only stateful object is :class:`Rng`, which is owned by exactly one
caller at a time.
"""

from __future__ import annotations

import numpy as np

# A tensor is a float64 ndarray; the alias documents intent in signatures.
Tensor = np.ndarray


class ShapeError(ValueError):
    """Raised when operand shapes are incompatible."""


def as_tensor(values) -> Tensor:
    return np.asarray(values, dtype=np.float64)


# ---------------------------------------------------------------------------
# elementwise and linear-algebra kernels
# ---------------------------------------------------------------------------

def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product of 2-D tensors with an explicit inner-dimension check."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeError(f"matmul expects 2-D operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul inner dimensions disagree: {a.shape} x {b.shape}")
    return a @ b


def _check_same_shape(op: str, a: Tensor, b: Tensor) -> None:
    if a.shape != b.shape:
        raise ShapeError(f"{op} requires equal shapes, got {a.shape} and {b.shape}")


def add(a: Tensor, b: Tensor) -> Tensor:
    _check_same_shape("add", a, b)
    return a + b


def sub(a: Tensor, b: Tensor) -> Tensor:
    _check_same_shape("sub", a, b)
    return a - b


def mul(a: Tensor, b: Tensor) -> Tensor:
    _check_same_shape("mul", a, b)
    return a * b


def sigmoid(x: Tensor) -> Tensor:
    """Logistic function, evaluated on the numerically safe branch per sign."""
    x = np.asarray(x, dtype=np.float64)
    z = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + z), z / (1.0 + z))


def tanh(x: Tensor) -> Tensor:
    return np.tanh(np.asarray(x, dtype=np.float64))


def relu(x: Tensor) -> Tensor:
    return np.maximum(np.asarray(x, dtype=np.float64), 0.0)


_UNARY = {"sigmoid": sigmoid, "tanh": tanh, "relu": relu}
_BINARY = {"add": add, "sub": sub, "mul": mul}


def elementwise(op: str, a: Tensor, b: Tensor | None = None) -> Tensor:
    """Dispatch an elementwise op by name; binary ops require equal shapes."""
    if op in _UNARY:
        if b is not None:
            raise ValueError(f"{op} is unary")
        return _UNARY[op](a)
    if op in _BINARY:
        if b is None:
            raise ValueError(f"{op} is binary")
        return _BINARY[op](a, b)
    raise ValueError(f"unknown elementwise op {op!r}")


def softmax(logits: Tensor) -> Tensor:
    """Row-wise softmax over the last axis, shifted by the row max for stability."""
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


# ---------------------------------------------------------------------------
# seeded pseudo-random generator
# ---------------------------------------------------------------------------

_MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3


def _mix64(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


def _shape_tuple(shape) -> tuple:
    if isinstance(shape, (int, np.integer)):
        return (int(shape),)
    return tuple(int(s) for s in shape)


class Rng:
    """SplitMix64 generator: a 64-bit counter advanced by a fixed odd gamma,
    with each output a finalizing hash of the counter.

    The k-th draw after seeding is a pure function of (seed, k) using only
    64-bit integer arithmetic, so sequences are identical across runs and
    platforms for the same seed.
    """

    def __init__(self, seed: int):
        self.seed = int(seed) & _MASK64
        self._counter = 0

    def next_uint64(self, n: int) -> np.ndarray:
        """Return the next ``n`` raw 64-bit draws."""
        ks = np.arange(self._counter + 1, self._counter + n + 1, dtype=np.uint64)
        self._counter += n
        with np.errstate(over="ignore"):
            state = ks * np.uint64(_GAMMA) + np.uint64(self.seed)
            return _mix64(state)

    def uniform(self, shape) -> Tensor:
        """I.i.d. uniform draws on [0, 1) using the top 53 bits of each word."""
        shape = _shape_tuple(shape)
        n = int(np.prod(shape, dtype=np.int64))
        bits = self.next_uint64(max(n, 0))
        vals = (bits >> np.uint64(11)).astype(np.float64) * (2.0 ** -53)
        return vals.reshape(shape)

    def normal(self, shape) -> Tensor:
        """Standard normal draws via the Box-Muller transform."""
        shape = _shape_tuple(shape)
        n = int(np.prod(shape, dtype=np.int64))
        pairs = (n + 1) // 2
        bits = self.next_uint64(2 * pairs)
        # u1 in (0, 1] so the log is finite; u2 in [0, 1).
        u1 = ((bits[:pairs] >> np.uint64(11)).astype(np.float64) + 1.0) * (2.0 ** -53)
        u2 = (bits[pairs:] >> np.uint64(11)).astype(np.float64) * (2.0 ** -53)
        r = np.sqrt(-2.0 * np.log(u1))
        theta = 2.0 * np.pi * u2
        out = np.concatenate([r * np.cos(theta), r * np.sin(theta)])[:n]
        return out.reshape(shape)

    def permutation(self, n: int) -> np.ndarray:
        """Deterministic permutation of range(n) by sorting one uniform draw each."""
        return np.argsort(self.uniform((n,)), kind="stable")

    def derive(self, tag: str) -> "Rng":
        """Independent child generator keyed by ``tag``; does not consume draws."""
        h = _FNV_OFFSET
        for byte in tag.encode("utf-8"):
            h = ((h ^ byte) * _FNV_PRIME) & _MASK64
        with np.errstate(over="ignore"):
            child = _mix64(np.uint64(self.seed ^ h))
        return Rng(int(child))


# ---------------------------------------------------------------------------
# weight initializers
# ---------------------------------------------------------------------------

def init_glorot_uniform(fan_in: int, fan_out: int, shape, rng: Rng) -> Tensor:
    """Uniform on [-L, L] with L = sqrt(6 / (fan_in + fan_out))."""
    if fan_in <= 0 or fan_out <= 0:
        raise ValueError(f"fans must be positive, got fan_in={fan_in}, fan_out={fan_out}")
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return (rng.uniform(shape) * 2.0 - 1.0) * limit


def init_he_uniform(fan_in: int, shape, rng: Rng) -> Tensor:
    """Uniform on [-L, L] with L = sqrt(6 / fan_in)."""
    if fan_in <= 0:
        raise ValueError(f"fan_in must be positive, got {fan_in}")
    limit = np.sqrt(6.0 / fan_in)
    return (rng.uniform(shape) * 2.0 - 1.0) * limit


def init_orthogonal(rows: int, cols: int, rng: Rng) -> Tensor:
    """Orthonormal columns for rows >= cols (rows for rows < cols).

    QR of a gaussian draw with the sign of R's diagonal folded into Q so the
    factorization is unique.
    """
    if rows <= 0 or cols <= 0:
        raise ValueError(f"dimensions must be positive, got {rows}x{cols}")
    a = rng.normal((max(rows, cols), min(rows, cols)))
    q, r = np.linalg.qr(a)
    d = np.sign(np.diag(r))
    d[d == 0] = 1.0
    q = q * d
    if rows < cols:
        q = q.T
    return np.ascontiguousarray(q)
