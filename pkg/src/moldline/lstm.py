"""LSTM recurrent networks over resampled signal blocks, trained with BPTT.

The standard cell equations are used: i, f, o gates are sigmoids, the cell
candidate is a tanh, c_t = f*c_prev + i*g and h_t = o*tanh(c_t). A dense
head maps the final hidden state to the scalar prediction. The two-layer
variant stacks a second LSTM over the full hidden sequence of the first.

Input framing: a standardized [3000 samples x 4 channels] block is reshaped
to 100 timesteps of 120 features (30 contiguous samples per channel,
channel-major). The per-sample alternative (3000 steps of 4 features) is
available behind the framing config flag.
"""
from __future__ import annotations

import json

import numpy as np

from .config import LstmConfig, derive_seed
from .errors import NonFiniteLoss, ShapeMismatch
from .nn.layers import Parameter
from .nn.losses import LOSSES
from .nn.optim import make_optimizer
from .persist import pack_array, unpack_array

FORMAT_VERSION = 1


def _sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def lstm_step(x_t, h_prev, c_prev, wx, wh, b):
    """One cell step for a batch; returns (h_t, c_t, cache)."""
    hidden = h_prev.shape[1]
    z = x_t @ wx + h_prev @ wh + b
    i = _sigmoid(z[:, :hidden])
    f = _sigmoid(z[:, hidden:2 * hidden])
    g = np.tanh(z[:, 2 * hidden:3 * hidden])
    o = _sigmoid(z[:, 3 * hidden:])
    c_t = f * c_prev + i * g
    tc = np.tanh(c_t)
    h_t = o * tc
    cache = (x_t, h_prev, c_prev, i, f, g, o, tc)
    return h_t, c_t, cache


def _step_backward(dh, dc_next, cache, wx, wh):
    """Gradients of one step; returns (dx, dh_prev, dc_prev, dwx, dwh, db)."""
    x_t, h_prev, c_prev, i, f, g, o, tc = cache
    do = dh * tc
    dc = dc_next + dh * o * (1.0 - tc ** 2)
    di = dc * g
    df = dc * c_prev
    dg = dc * i
    dc_prev = dc * f
    dz = np.concatenate([
        di * i * (1.0 - i),
        df * f * (1.0 - f),
        dg * (1.0 - g ** 2),
        do * o * (1.0 - o),
    ], axis=1)
    dwx = x_t.T @ dz
    dwh = h_prev.T @ dz
    db = dz.sum(axis=0)
    dx = dz @ wx.T
    dh_prev = dz @ wh.T
    return dx, dh_prev, dc_prev, dwx, dwh, db


class LstmModel:
    """One or two stacked LSTM layers plus a dense scalar head."""

    def __init__(self, input_size: int, hidden_size: int = 30, n_layers: int = 1,
                 seed: int = 0, init_std: float = 0.1):
        if n_layers not in (1, 2):
            raise ShapeMismatch(f"n_layers must be 1 or 2, got {n_layers}")
        self.input_size = input_size
        self.hidden_size = hidden_size
        self.n_layers = n_layers
        self.seed = seed
        self.init_std = init_std
        rng = np.random.default_rng(derive_seed(seed, "lstm-init"))
        self.cells = []
        d = input_size
        for _ in range(n_layers):
            wx = Parameter(rng.normal(0.0, init_std, (d, 4 * hidden_size)))
            wh = Parameter(rng.normal(0.0, init_std, (hidden_size, 4 * hidden_size)))
            b = Parameter(np.zeros(4 * hidden_size), decay=False)
            b.value[hidden_size:2 * hidden_size] = 1.0  # forget-gate bias
            self.cells.append((wx, wh, b))
            d = hidden_size
        self.w_out = Parameter(rng.normal(0.0, init_std, (hidden_size, 1)))
        self.b_out = Parameter(np.zeros(1), decay=False)

    def params(self) -> list:
        out = []
        for wx, wh, b in self.cells:
            out.extend([wx, wh, b])
        out.extend([self.w_out, self.b_out])
        return out

    def zero_grads(self):
        for p in self.params():
            p.zero_grad()

    def forward(self, x: np.ndarray) -> np.ndarray:
        """x is [batch, steps, features]; returns [batch, 1]."""
        if x.ndim != 3 or x.shape[2] != self.input_size:
            raise ShapeMismatch(f"expected [B, T, {self.input_size}], got {x.shape}")
        batch, steps, _ = x.shape
        hidden = self.hidden_size
        self._caches = []
        seq = x
        for wx, wh, b in self.cells:
            h = np.zeros((batch, hidden))
            c = np.zeros((batch, hidden))
            caches = []
            hs = np.empty((batch, steps, hidden))
            for t in range(steps):
                h, c, cache = lstm_step(seq[:, t, :], h, c, wx.value, wh.value, b.value)
                caches.append(cache)
                hs[:, t, :] = h
            self._caches.append(caches)
            seq = hs
        self._final_h = seq[:, -1, :]
        return self._final_h @ self.w_out.value + self.b_out.value

    def backward(self, dpred: np.ndarray) -> None:
        self.w_out.grad += self._final_h.T @ dpred
        self.b_out.grad += dpred.sum(axis=0)
        dh_seq = None  # gradient flowing into every hidden step of a layer
        dh_last = dpred @ self.w_out.value.T
        for layer in range(self.n_layers - 1, -1, -1):
            wx, wh, b = self.cells[layer]
            caches = self._caches[layer]
            steps = len(caches)
            batch = dh_last.shape[0]
            dh = np.zeros_like(dh_last)
            dc = np.zeros_like(dh_last)
            dx_seq = np.empty((batch, steps, wx.value.shape[0]))
            for t in range(steps - 1, -1, -1):
                step_dh = dh.copy()
                if dh_seq is not None:
                    step_dh += dh_seq[:, t, :]
                elif t == steps - 1:
                    step_dh += dh_last
                dx, dh, dc, dwx, dwh, db = _step_backward(
                    step_dh, dc, caches[t], wx.value, wh.value)
                wx.grad += dwx
                wh.grad += dwh
                b.grad += db
                dx_seq[:, t, :] = dx
            dh_seq = dx_seq  # becomes the hidden-sequence gradient of the layer below
        # dh_last only feeds the top layer; after the loop dh_seq is d(input)


def clip_grads(params, max_norm: float) -> float:
    """Scale all gradients so the global norm does not exceed max_norm."""
    total = 0.0
    for p in params:
        total += float((p.grad ** 2).sum())
    norm = float(np.sqrt(total))
    if max_norm > 0 and norm > max_norm:
        scale = max_norm / norm
        for p in params:
            p.grad *= scale
    return norm


def frame_signals(block: np.ndarray, steps: int, framing: str = "chunked") -> np.ndarray:
    """[n_samples, n_channels] -> [steps, features] per the configured framing."""
    n, channels = block.shape
    if framing == "per_sample":
        return block.copy()
    window = n // steps
    if window * steps != n:
        raise ShapeMismatch(f"{n} samples do not split into {steps} equal steps")
    return block[: steps * window].reshape(steps, window, channels) \
        .transpose(0, 2, 1).reshape(steps, window * channels)


def train_lstm(data: np.ndarray, labels: np.ndarray, config: LstmConfig | None = None,
               n_layers: int = 1, iters: int | None = None, seed: int = 0,
               log_every: int = 100) -> tuple:
    """Seeded minibatch BPTT training; returns (model, trajectory)."""
    config = config or LstmConfig()
    iters = config.iterations if iters is None else iters
    labels = np.asarray(labels, dtype=float).reshape(-1, 1)
    model = LstmModel(input_size=data.shape[2], hidden_size=config.hidden_size,
                      n_layers=n_layers, seed=seed)
    loss_fn = LOSSES[config.loss]
    optimizer = make_optimizer("adam", lr=config.learning_rate)
    batch_rng = np.random.default_rng(derive_seed(seed, "lstm-batch"))
    params = model.params()
    trajectory = []
    for it in range(1, iters + 1):
        idx = batch_rng.integers(0, data.shape[0], config.batch_size)
        model.zero_grads()
        pred = model.forward(data[idx])
        loss, dloss = loss_fn(pred, labels[idx])
        if not np.isfinite(loss):
            raise NonFiniteLoss(f"lstm{n_layers}: loss became {loss} at iteration {it}")
        model.backward(dloss)
        clip_grads(params, config.clip_norm)
        optimizer.step(params)
        if it % log_every == 0 or it == iters:
            trajectory.append((it, loss))
    return model, trajectory


def predict_lstm(model: LstmModel, data: np.ndarray, batch: int = 64) -> np.ndarray:
    outs = []
    for i in range(0, data.shape[0], batch):
        outs.append(model.forward(data[i:i + batch]).reshape(-1))
    return np.concatenate(outs)


# -- persistence ------------------------------------------------------------------

def lstm_to_dict(model: LstmModel) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "kind": "lstm",
        "input_size": model.input_size,
        "hidden_size": model.hidden_size,
        "n_layers": model.n_layers,
        "seed": model.seed,
        "init_std": model.init_std,
        "params": [pack_array(p.value) for p in model.params()],
    }


def lstm_from_dict(doc: dict) -> LstmModel:
    model = LstmModel(input_size=doc["input_size"], hidden_size=doc["hidden_size"],
                      n_layers=doc["n_layers"], seed=doc["seed"],
                      init_std=doc["init_std"])
    for p, packed in zip(model.params(), doc["params"]):
        p.value[...] = unpack_array(packed)
    return model


def save_lstm(model: LstmModel, path) -> None:
    with open(path, "w") as fh:
        json.dump(lstm_to_dict(model), fh)
        fh.write("\n")


def load_lstm(path) -> LstmModel:
    with open(path) as fh:
        return lstm_from_dict(json.load(fh))
