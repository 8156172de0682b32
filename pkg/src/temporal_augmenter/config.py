"""Run configuration: task presets, flat key=value config files, overrides.

A config file is plain text, one ``key = value`` per line, ``#`` comments.
``task`` selects a preset that pins the reference hyperparameters (split
ratios, batch size, epochs, optimizer); every other key overrides the
preset.  Relative ``data`` paths resolve against $TEMPORAL_AUGMENTER_DATA
when it is set.

Recognized keys:
  task, data, out, seed, standardize, target_len, label_col,
  split_train, split_val, split_test, stratified,
  optimizer, lr, epsilon, rho, momentum, beta1, beta2, batch_size, epochs,
  shuffle, clip_norm,
  conv_filters, conv_kernel, conv_activation, pool_size, dropout_stream,
  dropout_head, lstm_units, gru_units, dense_sizes, return_sequences, streams
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

from .data import SplitSpec
from .optim import TrainConfig


class ConfigError(Exception):
    """Raised for unparseable or inconsistent run configuration."""


TASKS = ("tess", "mitbih", "ionosphere", "custom")

# Reference per-task settings: split ratios, batching, optimizer.
PRESETS = {
    "tess": {
        "schema": "wav",
        "split": (0.7, 0.1, 0.2),
        "stratified": False,
        "train": {"optimizer": "rmsprop", "lr": 1e-3, "momentum": 0.0,
                  "epsilon": 1e-7, "batch_size": 32, "epochs": 20},
    },
    "mitbih": {
        "schema": "mitbih",
        "split": (0.6, 0.2, 0.2),
        "stratified": True,
        "train": {"optimizer": "adam", "lr": 1e-3, "epsilon": 1e-7,
                  "batch_size": 128, "epochs": 50},
    },
    "ionosphere": {
        "schema": "ionosphere",
        "split": (0.6, 0.2, 0.2),
        "stratified": False,
        "train": {"optimizer": "adam", "lr": 1e-3, "epsilon": 1e-7,
                  "batch_size": 128, "epochs": 100},
    },
    "custom": {
        "schema": "generic",
        "split": (0.6, 0.2, 0.2),
        "stratified": False,
        "train": {"optimizer": "adam", "lr": 1e-3, "epsilon": 1e-7,
                  "batch_size": 32, "epochs": 10},
    },
}

_MODEL_KEYS = ("conv_filters", "conv_kernel", "conv_activation", "pool_size",
               "dropout_stream", "dropout_head", "lstm_units", "gru_units",
               "dense_sizes", "return_sequences", "streams")
_TRAIN_KEYS = ("optimizer", "lr", "epsilon", "rho", "momentum", "beta1", "beta2",
               "batch_size", "epochs", "shuffle", "clip_norm")


@dataclass
class RunConfig:
    task: str
    data: str | None = None
    out: str | None = None
    seed: int = 0
    standardize: bool = True
    target_len: int = 1024
    label_col: str | None = None
    schema: str = "generic"
    split: SplitSpec = field(default_factory=SplitSpec)
    train: TrainConfig = field(default_factory=TrainConfig)
    model_overrides: dict = field(default_factory=dict)

    def resolved_data_path(self) -> str:
        if self.data is None:
            raise ConfigError("no data path configured")
        root = os.environ.get("TEMPORAL_AUGMENTER_DATA")
        if root and not os.path.isabs(self.data):
            return os.path.join(root, self.data)
        return self.data


def preset_run_config(task: str, seed: int = 0) -> RunConfig:
    if task not in TASKS:
        raise ConfigError(f"unknown task {task!r}; expected one of {TASKS}")
    preset = PRESETS[task]
    cfg = RunConfig(task=task, seed=seed, schema=preset["schema"])
    cfg.split = SplitSpec(ratios=preset["split"], seed=seed, stratified=preset["stratified"])
    cfg.train = TrainConfig(seed=seed, **preset["train"])
    return cfg


def _parse_bool(value: str, key: str) -> bool:
    low = value.lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ConfigError(f"{key}: expected a boolean, got {value!r}")


def _parse_scalar(value: str, kind, key: str):
    try:
        return kind(value)
    except ValueError:
        raise ConfigError(f"{key}: expected {kind.__name__}, got {value!r}") from None


_KEY_TYPES = {
    "seed": int, "target_len": int, "batch_size": int, "epochs": int,
    "conv_filters": int, "conv_kernel": int, "pool_size": int,
    "lstm_units": int, "gru_units": int,
    "lr": float, "epsilon": float, "rho": float, "momentum": float,
    "beta1": float, "beta2": float, "clip_norm": float,
    "split_train": float, "split_val": float, "split_test": float,
    "dropout_stream": float, "dropout_head": float,
    "standardize": bool, "stratified": bool, "shuffle": bool, "return_sequences": bool,
    "task": str, "data": str, "out": str, "label_col": str,
    "optimizer": str, "conv_activation": str,
    "dense_sizes": "int_list", "streams": "str_list",
}


def parse_config_text(text: str, source: str = "<config>") -> RunConfig:
    pairs = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _KEY_TYPES:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        if key in pairs:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        pairs[key] = value

    task = pairs.pop("task", None)
    if task is None:
        raise ConfigError(f"{source}: missing required key 'task'")
    if task not in TASKS:
        raise ConfigError(f"{source}: unknown task {task!r}; expected one of {TASKS}")
    seed = _parse_scalar(pairs.pop("seed", "0"), int, "seed")
    cfg = preset_run_config(task, seed=seed)

    ratios = list(cfg.split.ratios)
    for i, key in enumerate(("split_train", "split_val", "split_test")):
        if key in pairs:
            ratios[i] = _parse_scalar(pairs.pop(key), float, key)
    cfg.split.ratios = tuple(ratios)
    if "stratified" in pairs:
        cfg.split.stratified = _parse_bool(pairs.pop("stratified"), "stratified")

    for key in list(pairs):
        value = pairs.pop(key)
        kind = _KEY_TYPES[key]
        if kind == "int_list":
            parsed = tuple(_parse_scalar(v.strip(), int, key) for v in value.split(",") if v.strip())
        elif kind == "str_list":
            parsed = tuple(v.strip() for v in value.split(",") if v.strip())
        elif kind is bool:
            parsed = _parse_bool(value, key)
        else:
            parsed = _parse_scalar(value, kind, key)
        if key in _TRAIN_KEYS:
            setattr(cfg.train, key, parsed)
        elif key in _MODEL_KEYS:
            cfg.model_overrides[key] = parsed
        else:
            setattr(cfg, key, parsed)

    try:
        cfg.split.validate()
        cfg.train.validate()
    except ValueError as exc:
        raise ConfigError(f"{source}: {exc}") from None
    if cfg.task == "custom" and cfg.schema == "generic" and not cfg.label_col:
        raise ConfigError(f"{source}: custom task with generic schema requires label_col")
    return cfg


def load_config(path) -> RunConfig:
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    with open(path) as fh:
        return parse_config_text(fh.read(), source=str(path))


def format_config(cfg: RunConfig) -> str:
    """Stable textual rendering of a resolved run configuration."""
    lines = [
        f"task = {cfg.task}",
        f"data = {cfg.data}",
        f"seed = {cfg.seed}",
        f"schema = {cfg.schema}",
        f"standardize = {str(cfg.standardize).lower()}",
        f"split_train = {cfg.split.ratios[0]!r}",
        f"split_val = {cfg.split.ratios[1]!r}",
        f"split_test = {cfg.split.ratios[2]!r}",
        f"stratified = {str(cfg.split.stratified).lower()}",
    ]
    if cfg.schema == "wav":
        lines.append(f"target_len = {cfg.target_len}")
    if cfg.label_col:
        lines.append(f"label_col = {cfg.label_col}")
    for key in _TRAIN_KEYS:
        value = getattr(cfg.train, key)
        if value is None:
            continue
        if isinstance(value, bool):
            lines.append(f"{key} = {str(value).lower()}")
        elif isinstance(value, float):
            lines.append(f"{key} = {value!r}")
        else:
            lines.append(f"{key} = {value}")
    for key, value in sorted(cfg.model_overrides.items()):
        if isinstance(value, tuple):
            lines.append(f"{key} = {','.join(str(v) for v in value)}")
        else:
            lines.append(f"{key} = {value}")
    return "\n".join(lines) + "\n"
