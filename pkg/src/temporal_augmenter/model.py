"""The dual-stream ensemble network.

Each stream runs conv1d -> activation -> maxpool -> dropout -> recurrent
cell; the GRU stream captures short-term structure, the LSTM stream
long-term structure.  Stream outputs (the last hidden state by default) are
concatenated and fed through a dense head ending in softmax.

``build`` draws parameters in a fixed documented order so a (config, seed)
pair always produces bitwise-identical models:  for each stream in
``config.streams`` order the conv kernel (he-uniform) then the cell
parameters (glorot-uniform input weights, orthogonal recurrent weights);
then the head layers first-to-last (glorot-uniform).  Biases are zero.

Train-mode forward consumes rng draws in the same stream order (one dropout
mask per stream, then the head dropout).  Eval-mode forward consumes none.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from . import layers, recurrent
from .layers import Conv1DParams, DenseParams
from .tensor_core import Rng, ShapeError, Tensor, init_glorot_uniform, init_he_uniform, softmax


class TraceError(RuntimeError):
    """Raised when a backward pass gets a stale, reused, or eval-mode trace."""


@dataclass
class ModelConfig:
    input_timesteps: int
    input_channels: int
    num_classes: int
    conv_filters: int = 128
    conv_kernel: int = 1
    conv_activation: str = "relu"  # "relu" or "identity"
    pool_size: int = 2
    dropout_stream: float = 0.5
    dropout_head: float = 0.3
    lstm_units: int = 10
    gru_units: int = 10
    dense_sizes: tuple = (64, 32)
    return_sequences: bool = False
    streams: tuple = ("gru", "lstm")

    def __post_init__(self):
        self.dense_sizes = tuple(int(s) for s in self.dense_sizes)
        self.streams = tuple(self.streams)
        self.validate()

    def validate(self) -> None:
        positive = {
            "input_timesteps": self.input_timesteps,
            "input_channels": self.input_channels,
            "conv_filters": self.conv_filters,
            "conv_kernel": self.conv_kernel,
            "pool_size": self.pool_size,
            "lstm_units": self.lstm_units,
            "gru_units": self.gru_units,
        }
        for name, value in positive.items():
            if int(value) < 1:
                raise ValueError(f"{name} must be positive, got {value}")
        if self.num_classes < 2:
            raise ValueError(f"num_classes must be >= 2, got {self.num_classes}")
        for name, rate in (("dropout_stream", self.dropout_stream), ("dropout_head", self.dropout_head)):
            if not 0.0 <= rate < 1.0:
                raise ValueError(f"{name} must be in [0, 1), got {rate}")
        if self.conv_activation not in ("relu", "identity"):
            raise ValueError(f"conv_activation must be 'relu' or 'identity', got {self.conv_activation!r}")
        if any(s < 1 for s in self.dense_sizes):
            raise ValueError(f"dense_sizes must be positive, got {self.dense_sizes}")
        if not self.streams or any(s not in ("gru", "lstm") for s in self.streams):
            raise ValueError(f"streams must be a non-empty subset of ('gru', 'lstm'), got {self.streams}")
        if len(set(self.streams)) != len(self.streams):
            raise ValueError(f"duplicate stream in {self.streams}")
        if self.recurrent_timesteps < 1:
            raise ValueError(
                f"conv_kernel={self.conv_kernel} and pool_size={self.pool_size} leave no "
                f"timesteps from input_timesteps={self.input_timesteps}")

    @property
    def recurrent_timesteps(self) -> int:
        """Timesteps seen by the recurrent cells after conv (valid) and pooling."""
        return (self.input_timesteps - self.conv_kernel + 1) // self.pool_size

    def stream_units(self, kind: str) -> int:
        return self.gru_units if kind == "gru" else self.lstm_units

    def stream_width(self, kind: str) -> int:
        u = self.stream_units(kind)
        return u * self.recurrent_timesteps if self.return_sequences else u

    @property
    def concat_width(self) -> int:
        return sum(self.stream_width(kind) for kind in self.streams)


@dataclass
class StreamParams:
    kind: str  # "gru" or "lstm"
    conv: Conv1DParams
    cell: object  # GRUParams or LSTMParams


@dataclass
class TemporalAugmenterModel:
    config: ModelConfig
    streams: list
    head: list  # hidden DenseParams..., output DenseParams last

    def parameters(self) -> dict:
        """Flat name -> tensor view of every trainable parameter (stable order)."""
        out = {}
        for sp in self.streams:
            out[f"{sp.kind}.conv.K"] = sp.conv.K
            out[f"{sp.kind}.conv.b"] = sp.conv.b
            for name, value in recurrent.params_as_dict(sp.cell).items():
                out[f"{sp.kind}.cell.{name}"] = value
        for idx, dp in enumerate(self.head[:-1]):
            out[f"head.{idx}.W"] = dp.W
            out[f"head.{idx}.b"] = dp.b
        out["head.out.W"] = self.head[-1].W
        out["head.out.b"] = self.head[-1].b
        return out


@dataclass
class ForwardTrace:
    """Per-layer caches from one train-mode forward; consumed by one backward."""
    mode: str
    stream_caches: list
    head_caches: list
    consumed: bool = field(default=False)


def build(config: ModelConfig, rng: Rng) -> TemporalAugmenterModel:
    """Instantiate all parameters for the configured architecture."""
    config.validate()
    k, d, F = config.conv_kernel, config.input_channels, config.conv_filters
    streams = []
    for kind in config.streams:
        K = init_he_uniform(k * d, (k, d, F), rng)
        conv = Conv1DParams(K=K, b=np.zeros(F))
        if kind == "gru":
            cell = recurrent.init_gru_params(F, config.gru_units, rng)
        else:
            cell = recurrent.init_lstm_params(F, config.lstm_units, rng)
        streams.append(StreamParams(kind=kind, conv=conv, cell=cell))
    head = []
    in_size = config.concat_width
    for size in config.dense_sizes:
        head.append(DenseParams(W=init_glorot_uniform(in_size, size, (in_size, size), rng),
                                b=np.zeros(size)))
        in_size = size
    head.append(DenseParams(W=init_glorot_uniform(in_size, config.num_classes,
                                                  (in_size, config.num_classes), rng),
                            b=np.zeros(config.num_classes)))
    return TemporalAugmenterModel(config=config, streams=streams, head=head)


def _stream_forward(sp: StreamParams, cfg: ModelConfig, x: Tensor, mode: str, rng):
    conv_y, conv_cache = layers.conv1d_forward(x, sp.conv)
    if cfg.conv_activation == "relu":
        act_y, act_cache = layers.relu_forward(conv_y)
    else:
        act_y, act_cache = conv_y, None
    pool_y, pool_cache = layers.maxpool1d_forward(act_y, cfg.pool_size)
    drop_y, drop_cache = layers.dropout_forward(pool_y, cfg.dropout_stream, mode, rng)
    if sp.kind == "gru":
        hs, cell_cache = recurrent.gru_forward(drop_y, sp.cell)
    else:
        hs, cell_cache = recurrent.lstm_forward(drop_y, sp.cell)
    if cfg.return_sequences:
        out = hs.reshape(hs.shape[0], -1)
    else:
        out = hs[:, -1]
    return out, (conv_cache, act_cache, pool_cache, drop_cache, cell_cache, hs.shape)


def forward(model: TemporalAugmenterModel, x: Tensor, mode: str = "eval", rng: Rng | None = None):
    """Run the network; returns (probs [n, num_classes], ForwardTrace)."""
    cfg = model.config
    if x.ndim != 3 or x.shape[1] != cfg.input_timesteps or x.shape[2] != cfg.input_channels:
        raise ShapeError(
            f"input {x.shape} does not match configured "
            f"[n, {cfg.input_timesteps}, {cfg.input_channels}]")
    stream_outs = []
    stream_caches = []
    for sp in model.streams:
        out, cache = _stream_forward(sp, cfg, x, mode, rng)
        stream_outs.append(out)
        stream_caches.append(cache)
    a = np.concatenate(stream_outs, axis=1)
    head_caches = []
    for idx, dp in enumerate(model.head[:-1]):
        z, dense_cache = layers.dense_forward(a, dp)
        a, relu_cache = layers.relu_forward(z)
        drop_cache = None
        if idx == 0:
            a, drop_cache = layers.dropout_forward(a, cfg.dropout_head, mode, rng)
        head_caches.append((dense_cache, relu_cache, drop_cache))
    logits, out_cache = layers.dense_forward(a, model.head[-1])
    head_caches.append((out_cache, None, None))
    probs = softmax(logits)
    return probs, ForwardTrace(mode=mode, stream_caches=stream_caches, head_caches=head_caches)


def _stream_backward(sp: StreamParams, cfg: ModelConfig, cache, d_out: Tensor) -> dict:
    conv_cache, act_cache, pool_cache, drop_cache, cell_cache, hs_shape = cache
    if cfg.return_sequences:
        d_hs = d_out.reshape(hs_shape)
    else:
        d_hs = np.zeros(hs_shape)
        d_hs[:, -1] = d_out
    if sp.kind == "gru":
        d_drop, cell_grads = recurrent.gru_backward(cell_cache, d_hs)
    else:
        d_drop, cell_grads = recurrent.lstm_backward(cell_cache, d_hs)
    d_pool = layers.dropout_backward(drop_cache, d_drop)
    d_act = layers.maxpool1d_backward(pool_cache, d_pool)
    if cfg.conv_activation == "relu":
        d_conv = layers.relu_backward(act_cache, d_act)
    else:
        d_conv = d_act
    _, dK, db = layers.conv1d_backward(conv_cache, d_conv)
    grads = {f"{sp.kind}.conv.K": dK, f"{sp.kind}.conv.b": db}
    for name, g in cell_grads.items():
        grads[f"{sp.kind}.cell.{name}"] = g
    return grads


def backward(model: TemporalAugmenterModel, trace: ForwardTrace, dlogits: Tensor) -> dict:
    """Exact gradients of every parameter given dL/dlogits from the loss.

    The trace must come from a train-mode forward and is consumed by this call.
    """
    if trace is None or trace.consumed:
        raise TraceError("forward trace is missing or already consumed")
    if trace.mode != "train":
        raise TraceError("backward requires a trace from a train-mode forward")
    trace.consumed = True
    cfg = model.config
    grads = {}
    out_cache, _, _ = trace.head_caches[-1]
    da, dW, db = layers.dense_backward(out_cache, dlogits)
    grads["head.out.W"] = dW
    grads["head.out.b"] = db
    for idx in range(len(model.head) - 2, -1, -1):
        dense_cache, relu_cache, drop_cache = trace.head_caches[idx]
        if drop_cache is not None:
            da = layers.dropout_backward(drop_cache, da)
        da = layers.relu_backward(relu_cache, da)
        da, dW, db = layers.dense_backward(dense_cache, da)
        grads[f"head.{idx}.W"] = dW
        grads[f"head.{idx}.b"] = db
    offset = 0
    for sp, cache in zip(model.streams, trace.stream_caches):
        width = cfg.stream_width(sp.kind)
        grads.update(_stream_backward(sp, cfg, cache, da[:, offset:offset + width]))
        offset += width
    return grads


def param_count(model: TemporalAugmenterModel) -> int:
    """Total number of scalar parameters."""
    return int(sum(p.size for p in model.parameters().values()))


# ---------------------------------------------------------------------------
# checkpoint container
# ---------------------------------------------------------------------------
#
# Layout (version 1):
#   bytes 0..7    magic  b"TACKPT01"
#   bytes 8..15   uint64 little-endian header length H
#   bytes 16..16+H  UTF-8 JSON header:
#       {"version": 1, "config": {...}, "tensors": [{"name","shape"}...],
#        "extras": {...}}
#   then, for each entry of "tensors" in order, the raw little-endian
#   float64 values (C order).
# Model parameters are stored under their parameters() names; callers may
# attach additional named tensors (e.g. scaler statistics) and a JSON
# extras dict.  Loading reconstructs the model bitwise.

_MAGIC = b"TACKPT01"


def save_checkpoint(path, model: TemporalAugmenterModel, extras: dict | None = None,
                    extra_tensors: dict | None = None) -> None:
    tensors = dict(model.parameters())
    for name, arr in (extra_tensors or {}).items():
        key = f"extra.{name}"
        if key in tensors:
            raise ValueError(f"duplicate tensor name {key!r}")
        tensors[key] = np.asarray(arr, dtype=np.float64)
    header = {
        "version": 1,
        "config": asdict(model.config),
        "tensors": [{"name": n, "shape": list(t.shape)} for n, t in tensors.items()],
        "extras": extras or {},
    }
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(len(blob).to_bytes(8, "little"))
        fh.write(blob)
        for t in tensors.values():
            fh.write(np.ascontiguousarray(t, dtype="<f8").tobytes())


def load_checkpoint(path):
    """Returns (model, extras, extra_tensors)."""
    with open(path, "rb") as fh:
        magic = fh.read(8)
        if magic != _MAGIC:
            raise ValueError(f"{path}: not a checkpoint file (bad magic {magic!r})")
        hlen = int.from_bytes(fh.read(8), "little")
        header = json.loads(fh.read(hlen).decode("utf-8"))
        if header.get("version") != 1:
            raise ValueError(f"{path}: unsupported checkpoint version {header.get('version')}")
        cfg_dict = dict(header["config"])
        config = ModelConfig(**cfg_dict)
        tensors = {}
        for entry in header["tensors"]:
            shape = tuple(entry["shape"])
            count = int(np.prod(shape, dtype=np.int64)) if shape else 1
            data = np.frombuffer(fh.read(count * 8), dtype="<f8").astype(np.float64)
            tensors[entry["name"]] = data.reshape(shape)
    model = build(config, Rng(0))
    params = model.parameters()
    for name, arr in params.items():
        if name not in tensors:
            raise ValueError(f"{path}: checkpoint missing parameter {name!r}")
        arr[...] = tensors.pop(name)
    extra_tensors = {n[len("extra."):]: t for n, t in tensors.items() if n.startswith("extra.")}
    return model, header.get("extras", {}), extra_tensors
