"""Categorical cross-entropy, RMSProp and Adam, and the epoch training loop."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from . import model as model_mod
from .tensor_core import Rng, ShapeError, Tensor


class TrainingDivergenceError(RuntimeError):
    """Raised when the minibatch loss stops being finite."""

    def __init__(self, epoch: int, batch: int):
        super().__init__(f"non-finite training loss at epoch {epoch}, batch {batch}")
        self.epoch = epoch
        self.batch = batch


def cce_loss(probs: Tensor, onehot: Tensor):
    """Mean categorical cross-entropy over softmax probabilities.

    Returns (loss, dL/dlogits) where the gradient is the fused
    softmax-plus-cross-entropy form (probs - onehot) / n.
    """
    if probs.shape != onehot.shape:
        raise ShapeError(f"probs {probs.shape} and targets {onehot.shape} disagree")
    is01 = (onehot == 0.0) | (onehot == 1.0)
    if not is01.all() or not np.allclose(onehot.sum(axis=1), 1.0):
        raise ValueError("targets must be one-hot rows")
    n = probs.shape[0]
    p = np.clip(probs, 1e-12, None)
    loss = float(-np.sum(onehot * np.log(p)) / n)
    dlogits = (probs - onehot) / n
    return loss, dlogits


class RMSProp:
    """RMSProp: s <- rho*s + (1-rho)*g^2; p <- p - lr*g/(sqrt(s)+eps).

    With momentum > 0 a velocity buffer accumulates the scaled step
    (v <- momentum*v + lr*g/(sqrt(s)+eps)); the default momentum of 0
    reduces to the plain update.
    """

    def __init__(self, lr: float = 1e-3, rho: float = 0.9, momentum: float = 0.0,
                 epsilon: float = 1e-7):
        self.lr = lr
        self.rho = rho
        self.momentum = momentum
        self.epsilon = epsilon
        self.s = {}
        self.v = {}

    def step(self, params: dict, grads: dict) -> None:
        for name, p in params.items():
            g = grads[name]
            if g.shape != p.shape:
                raise ShapeError(f"gradient shape {g.shape} != parameter shape {p.shape} for {name}")
            if name not in self.s:
                self.s[name] = np.zeros_like(p)
            s = self.s[name]
            s *= self.rho
            s += (1.0 - self.rho) * g * g
            update = self.lr * g / (np.sqrt(s) + self.epsilon)
            if self.momentum > 0.0:
                if name not in self.v:
                    self.v[name] = np.zeros_like(p)
                v = self.v[name]
                v *= self.momentum
                v += update
                update = v
            p -= update


class Adam:
    """Adam with bias correction; epsilon sits outside the square root."""

    def __init__(self, lr: float = 1e-3, beta1: float = 0.9, beta2: float = 0.999,
                 epsilon: float = 1e-7):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.m = {}
        self.v = {}
        self.t = 0

    def step(self, params: dict, grads: dict) -> None:
        self.t += 1
        b1t = 1.0 - self.beta1 ** self.t
        b2t = 1.0 - self.beta2 ** self.t
        for name, p in params.items():
            g = grads[name]
            if g.shape != p.shape:
                raise ShapeError(f"gradient shape {g.shape} != parameter shape {p.shape} for {name}")
            if name not in self.m:
                self.m[name] = np.zeros_like(p)
                self.v[name] = np.zeros_like(p)
            m, v = self.m[name], self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / b1t) / (np.sqrt(v / b2t) + self.epsilon)


@dataclass
class TrainConfig:
    optimizer: str = "adam"  # "adam" or "rmsprop"
    lr: float = 1e-3
    epsilon: float = 1e-7
    rho: float = 0.9
    momentum: float = 0.0
    beta1: float = 0.9
    beta2: float = 0.999
    batch_size: int = 32
    epochs: int = 1
    seed: int = 0
    shuffle: bool = True
    clip_norm: float | None = None

    def validate(self) -> None:
        if self.optimizer not in ("adam", "rmsprop"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")

    def make_optimizer(self):
        if self.optimizer == "adam":
            return Adam(lr=self.lr, beta1=self.beta1, beta2=self.beta2, epsilon=self.epsilon)
        return RMSProp(lr=self.lr, rho=self.rho, momentum=self.momentum, epsilon=self.epsilon)


@dataclass
class EpochStats:
    epoch: int
    train_loss: float
    train_acc: float
    val_loss: float
    val_acc: float


@dataclass
class TrainLog:
    epochs: list = field(default_factory=list)

    def append(self, stats: EpochStats) -> None:
        self.epochs.append(stats)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["epoch", "train_loss", "train_acc", "val_loss", "val_acc"])
            for e in self.epochs:
                writer.writerow([e.epoch, repr(float(e.train_loss)), repr(float(e.train_acc)),
                                 repr(float(e.val_loss)), repr(float(e.val_acc))])

    @staticmethod
    def from_csv(path) -> "TrainLog":
        log = TrainLog()
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                log.append(EpochStats(epoch=int(row["epoch"]),
                                      train_loss=float(row["train_loss"]),
                                      train_acc=float(row["train_acc"]),
                                      val_loss=float(row["val_loss"]),
                                      val_acc=float(row["val_acc"])))
        return log


def predict_probs(model, x: Tensor, batch_size: int = 256) -> Tensor:
    """Eval-mode class probabilities, computed in batches."""
    chunks = []
    for start in range(0, x.shape[0], batch_size):
        probs, _ = model_mod.forward(model, x[start:start + batch_size], mode="eval")
        chunks.append(probs)
    return np.concatenate(chunks, axis=0)


def evaluate(model, x: Tensor, labels: np.ndarray, batch_size: int = 256):
    """Eval-mode (loss, accuracy) over a dataset."""
    probs = predict_probs(model, x, batch_size)
    onehot = np.zeros_like(probs)
    onehot[np.arange(labels.shape[0]), labels] = 1.0
    loss, _ = cce_loss(probs, onehot)
    acc = float(np.mean(probs.argmax(axis=1) == labels))
    return float(loss), acc


def _clip_global_norm(grads: dict, max_norm: float) -> None:
    total = np.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
    if total > max_norm:
        scale = max_norm / total
        for g in grads.values():
            g *= scale


def fit(model, train_set, val_set, cfg: TrainConfig, rng: Rng | None = None):
    """Train in place; returns (model, TrainLog).

    Per epoch: seeded shuffle, minibatch forward/backward (the last partial
    batch is processed, not dropped), one optimizer step per batch.  Logged
    train loss/accuracy are the running minibatch averages for the epoch;
    validation metrics come from a full eval-mode pass, which never touches
    the gradient path.
    """
    cfg.validate()
    x_train, y_train = train_set.features, train_set.labels
    x_val, y_val = val_set.features, val_set.labels
    if x_train.shape[0] == 0 or x_val.shape[0] == 0:
        raise ValueError("datasets must be non-empty")
    k = model.config.num_classes
    if y_train.max() >= k or y_train.min() < 0:
        raise ValueError(f"training label out of range for {k} classes")
    if rng is None:
        rng = Rng(cfg.seed)
    params = model.parameters()
    optimizer = cfg.make_optimizer()
    n = x_train.shape[0]
    onehot_all = np.zeros((n, k))
    onehot_all[np.arange(n), y_train] = 1.0
    log = TrainLog()
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(n) if cfg.shuffle else np.arange(n)
        loss_sum = 0.0
        hit_sum = 0
        for batch_idx, start in enumerate(range(0, n, cfg.batch_size)):
            sel = order[start:start + cfg.batch_size]
            xb = x_train[sel]
            yb = onehot_all[sel]
            probs, trace = model_mod.forward(model, xb, mode="train", rng=rng)
            loss, dlogits = cce_loss(probs, yb)
            if not np.isfinite(loss):
                raise TrainingDivergenceError(epoch, batch_idx)
            grads = model_mod.backward(model, trace, dlogits)
            if cfg.clip_norm is not None:
                _clip_global_norm(grads, cfg.clip_norm)
            optimizer.step(params, grads)
            loss_sum += loss * sel.shape[0]
            hit_sum += int(np.sum(probs.argmax(axis=1) == y_train[sel]))
        val_loss, val_acc = evaluate(model, x_val, y_val, batch_size=max(cfg.batch_size, 256))
        log.append(EpochStats(epoch=epoch,
                              train_loss=loss_sum / n,
                              train_acc=hit_sum / n,
                              val_loss=val_loss,
                              val_acc=val_acc))
    return model, log
