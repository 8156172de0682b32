"""Central finite-difference verification of every analytic backward pass.

Each check builds random instances, evaluates a scalar objective (a fixed
random projection of the outputs, or the cross-entropy loss for the whole
network), and compares the analytic gradients against central differences
with h = 1e-5.  Relative error uses a small denominator floor so exactly-zero
gradients compare cleanly.  Nondifferentiable points (ReLU kinks, pooling
ties) are kept out of the sampled instances by construction.
"""

from __future__ import annotations

import numpy as np

from . import layers, model as model_mod, optim, recurrent
from .model import ModelConfig
from .tensor_core import Rng

TOLERANCE = 1e-4
_H = 1e-5


def max_rel_err(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-6) -> float:
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return float(np.max(np.abs(analytic - numeric) / denom))


def fd_grad(objective, arr: np.ndarray) -> np.ndarray:
    """Central finite differences of a scalar objective w.r.t. arr, in place."""
    out = np.zeros_like(arr)
    for idx in np.ndindex(arr.shape):
        orig = arr[idx]
        arr[idx] = orig + _H
        fp = objective()
        arr[idx] = orig - _H
        fm = objective()
        arr[idx] = orig
        out[idx] = (fp - fm) / (2.0 * _H)
    return out


def _uniform_pm(rng: Rng, shape) -> np.ndarray:
    return rng.uniform(shape) * 2.0 - 1.0


def check_dense(seed: int = 0, trials: int = 5) -> float:
    rng = Rng(seed).derive("dense")
    worst = 0.0
    for _ in range(trials):
        n = 2 + int(rng.uniform(()) * 4)
        i = 1 + int(rng.uniform(()) * 6)
        o = 1 + int(rng.uniform(()) * 5)
        x = _uniform_pm(rng, (n, i))
        p = layers.DenseParams(W=_uniform_pm(rng, (i, o)), b=_uniform_pm(rng, (o,)))
        proj = _uniform_pm(rng, (n, o))
        y, cache = layers.dense_forward(x, p)
        dx, dW, db = layers.dense_backward(cache, proj)

        def objective():
            return float(np.sum(layers.dense_forward(x, p)[0] * proj))

        for analytic, arr in ((dx, x), (dW, p.W), (db, p.b)):
            worst = max(worst, max_rel_err(analytic, fd_grad(objective, arr)))
    return worst


def check_conv1d(seed: int = 0, trials: int = 5) -> float:
    rng = Rng(seed).derive("conv1d")
    worst = 0.0
    for trial in range(trials):
        n = 2 + int(rng.uniform(()) * 2)
        k = 1 + trial % 3
        T = k + 2 + int(rng.uniform(()) * 4)
        c = 1 + int(rng.uniform(()) * 3)
        F = 1 + int(rng.uniform(()) * 4)
        x = _uniform_pm(rng, (n, T, c))
        p = layers.Conv1DParams(K=_uniform_pm(rng, (k, c, F)), b=_uniform_pm(rng, (F,)))
        proj = _uniform_pm(rng, (n, T - k + 1, F))
        _, cache = layers.conv1d_forward(x, p)
        dx, dK, db = layers.conv1d_backward(cache, proj)

        def objective():
            return float(np.sum(layers.conv1d_forward(x, p)[0] * proj))

        for analytic, arr in ((dx, x), (dK, p.K), (db, p.b)):
            worst = max(worst, max_rel_err(analytic, fd_grad(objective, arr)))
    return worst


def _gapped_windows(rng: Rng, shape, pool: int) -> np.ndarray:
    """Random input whose in-window values are separated by > 100*h."""
    while True:
        x = _uniform_pm(rng, shape)
        n, T, c = shape
        windows = x[:, :(T // pool) * pool, :].reshape(n, T // pool, pool, c)
        sorted_w = np.sort(windows, axis=2)
        if pool == 1 or np.min(np.diff(sorted_w, axis=2)) > 100 * _H:
            return x


def check_maxpool1d(seed: int = 0, trials: int = 5) -> float:
    rng = Rng(seed).derive("maxpool")
    worst = 0.0
    for trial in range(trials):
        n = 2 + int(rng.uniform(()) * 2)
        pool = 1 + trial % 3
        T = pool * (2 + int(rng.uniform(()) * 3)) + trial % 2
        c = 1 + int(rng.uniform(()) * 3)
        x = _gapped_windows(rng, (n, T, c), pool)
        y, cache = layers.maxpool1d_forward(x, pool)
        proj = _uniform_pm(rng, y.shape)
        dx = layers.maxpool1d_backward(cache, proj)

        def objective():
            return float(np.sum(layers.maxpool1d_forward(x, pool)[0] * proj))

        worst = max(worst, max_rel_err(dx, fd_grad(objective, x)))
    return worst


def check_relu(seed: int = 0, trials: int = 5) -> float:
    rng = Rng(seed).derive("relu")
    worst = 0.0
    for _ in range(trials):
        shape = (2 + int(rng.uniform(()) * 3), 1 + int(rng.uniform(()) * 6))
        x = _uniform_pm(rng, shape)
        x += np.where(x >= 0, 1e-2, -1e-2)  # keep away from the kink
        proj = _uniform_pm(rng, shape)
        _, cache = layers.relu_forward(x)
        dx = layers.relu_backward(cache, proj)

        def objective():
            return float(np.sum(layers.relu_forward(x)[0] * proj))

        worst = max(worst, max_rel_err(dx, fd_grad(objective, x)))
    return worst


def check_dropout(seed: int = 0, trials: int = 3) -> float:
    rng = Rng(seed).derive("dropout")
    worst = 0.0
    for trial in range(trials):
        shape = (3, 4 + trial)
        x = _uniform_pm(rng, shape)
        proj = _uniform_pm(rng, shape)
        mask_seed = int(rng.uniform(()) * 1e9)

        def run_forward():
            return layers.dropout_forward(x, 0.4, "train", Rng(mask_seed))

        _, cache = run_forward()
        dx = layers.dropout_backward(cache, proj)

        def objective():
            return float(np.sum(run_forward()[0] * proj))

        worst = max(worst, max_rel_err(dx, fd_grad(objective, x)))
    return worst


def _check_cell(kind: str, seed: int) -> float:
    rng = Rng(seed).derive(kind)
    worst = 0.0
    for T in (1, 2, 5):
        n, d, u = 3, 4, 3
        if kind == "lstm":
            params = recurrent.init_lstm_params(d, u, rng)
            run = recurrent.lstm_forward
            run_back = recurrent.lstm_backward
        else:
            params = recurrent.init_gru_params(d, u, rng)
            run = recurrent.gru_forward
            run_back = recurrent.gru_backward
        pdict = recurrent.params_as_dict(params)
        for name in pdict:
            if name.startswith("b_"):
                pdict[name] += _uniform_pm(rng, pdict[name].shape) * 0.1
        x = _uniform_pm(rng, (n, T, d))
        proj = _uniform_pm(rng, (n, T, u))
        _, cache = run(x, params)
        dx, grads = run_back(cache, proj)

        def objective():
            return float(np.sum(run(x, params)[0] * proj))

        worst = max(worst, max_rel_err(dx, fd_grad(objective, x)))
        for name, arr in pdict.items():
            worst = max(worst, max_rel_err(grads[name], fd_grad(objective, arr)))
    return worst


def check_lstm(seed: int = 0) -> float:
    return _check_cell("lstm", seed)


def check_gru(seed: int = 0) -> float:
    return _check_cell("gru", seed)


def miniature_config() -> ModelConfig:
    return ModelConfig(input_timesteps=5, input_channels=2, num_classes=3,
                       conv_filters=4, conv_kernel=2, pool_size=2,
                       dropout_stream=0.0, dropout_head=0.0,
                       lstm_units=3, gru_units=3, dense_sizes=(5, 4))


def _instance_clean(net, x: np.ndarray, band: float = 1e-3) -> bool:
    """True when no pre-activation sits within ``band`` of a ReLU kink and no
    pooling window holds values closer than ``band`` (FD would cross the
    nondifferentiability otherwise)."""
    cfg = net.config
    n = x.shape[0]
    outs = []
    for sp in net.streams:
        pre, _ = layers.conv1d_forward(x, sp.conv)
        if np.min(np.abs(pre)) < band:
            return False
        act = np.maximum(pre, 0.0)
        t_out = act.shape[1] // cfg.pool_size
        windows = act[:, :t_out * cfg.pool_size, :].reshape(n, t_out, cfg.pool_size, -1)
        if cfg.pool_size > 1:
            # ties among clamped zeros are safe (gradient is zero either way,
            # and the conv check keeps their pre-activations off the kink);
            # near-ties among positive values would flip the argmax under FD
            sorted_w = np.sort(windows, axis=2)
            gaps = np.diff(sorted_w, axis=2)
            positive_pair = sorted_w[:, :, 1:, :] > 0.0
            if np.any((gaps < band) & positive_pair):
                return False
        pooled = windows.max(axis=2)
        if sp.kind == "gru":
            hs, _ = recurrent.gru_forward(pooled, sp.cell)
        else:
            hs, _ = recurrent.lstm_forward(pooled, sp.cell)
        outs.append(hs.reshape(n, -1) if cfg.return_sequences else hs[:, -1])
    a = np.concatenate(outs, axis=1)
    for dp in net.head[:-1]:
        pre = a @ dp.W + dp.b
        if np.min(np.abs(pre)) < band:
            return False
        a = np.maximum(pre, 0.0)
    return True


def _build_clean_instance(cfg: ModelConfig, rng: Rng, n: int):
    """Model plus input sampled away from every ReLU kink and pooling near-tie.

    Biases get small random values: zero-bias builds can leave a whole dense
    layer dead (every pre-activation exactly on the kink), and bias gradients
    are part of the check anyway.
    """
    for _ in range(20):
        net = model_mod.build(cfg, rng)
        for name, arr in net.parameters().items():
            if name.endswith(".b") or ".cell.b_" in name:
                arr += _uniform_pm(rng, arr.shape) * 0.4
            if name.endswith("conv.b"):  # bias conv outputs off the clamp
                arr += 0.8
        for _ in range(200):
            x = _uniform_pm(rng, (n, cfg.input_timesteps, cfg.input_channels))
            if _instance_clean(net, x):
                return net, x
    raise RuntimeError("could not sample a kink-free model instance")


def check_model(seed: int = 0, builds: int = 2) -> float:
    """Whole-network loss gradient versus finite differences."""
    worst = 0.0
    for b in range(builds):
        rng = Rng(seed + b).derive("model")
        cfg = miniature_config()
        n = 3
        net, x = _build_clean_instance(cfg, rng, n)
        labels = (rng.uniform((n,)) * cfg.num_classes).astype(np.int64)
        onehot = np.zeros((n, cfg.num_classes))
        onehot[np.arange(n), labels] = 1.0

        def objective():
            probs, _ = model_mod.forward(net, x, mode="train", rng=Rng(0))
            return float(optim.cce_loss(probs, onehot)[0])

        probs, trace = model_mod.forward(net, x, mode="train", rng=Rng(0))
        _, dlogits = optim.cce_loss(probs, onehot)
        grads = model_mod.backward(net, trace, dlogits)
        for name, arr in net.parameters().items():
            worst = max(worst, max_rel_err(grads[name], fd_grad(objective, arr)))
    return worst


COMPONENTS = {
    "dense": check_dense,
    "conv1d": check_conv1d,
    "maxpool1d": check_maxpool1d,
    "relu": check_relu,
    "dropout": check_dropout,
    "lstm": check_lstm,
    "gru": check_gru,
    "model": check_model,
}


def run(components=None, seed: int = 0) -> dict:
    """Run the named checks (all by default); returns component -> max rel err."""
    names = list(COMPONENTS) if components is None else list(components)
    results = {}
    for name in names:
        if name not in COMPONENTS:
            raise ValueError(f"unknown gradcheck component {name!r}; "
                             f"expected one of {sorted(COMPONENTS)}")
        results[name] = COMPONENTS[name](seed=seed)
    return results
