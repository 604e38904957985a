"""Layer forward/backward passes for the minimal reverse-mode engine.

All activations are batched with the sample axis first; images are
channels-last [B, H, W, C]. Every backward pass computes exact gradients
for its inputs and parameters; the test suite checks each one against
central finite differences.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ShapeMismatch


@dataclass
class Parameter:
    value: np.ndarray
    grad: np.ndarray = None
    decay: bool = True  # participates in the L2 penalty (weights yes, biases no)

    def __post_init__(self):
        if self.grad is None:
            self.grad = np.zeros_like(self.value)

    def zero_grad(self):
        self.grad[...] = 0.0


class Layer:
    def params(self) -> list:
        return []

    def out_shape(self, in_shape: tuple) -> tuple:
        raise NotImplementedError

    def forward(self, x: np.ndarray, train: bool = False, rng=None) -> np.ndarray:
        raise NotImplementedError

    def backward(self, dy: np.ndarray) -> np.ndarray:
        raise NotImplementedError


class Dense(Layer):
    def __init__(self, n_in: int, n_out: int):
        self.w = Parameter(np.zeros((n_out, n_in)))
        self.b = Parameter(np.zeros(n_out), decay=False)

    def params(self):
        return [self.w, self.b]

    def out_shape(self, in_shape):
        if len(in_shape) != 1 or in_shape[0] != self.w.value.shape[1]:
            raise ShapeMismatch(f"dense expects ({self.w.value.shape[1]},), got {in_shape}")
        return (self.w.value.shape[0],)

    def forward(self, x, train=False, rng=None):
        self._x = x
        return x @ self.w.value.T + self.b.value

    def backward(self, dy):
        self.w.grad += dy.T @ self._x
        self.b.grad += dy.sum(axis=0)
        return dy @ self.w.value


def _same_pad(size: int, stride: int, kernel: int) -> tuple:
    out = -(-size // stride)  # ceil
    total = max((out - 1) * stride + kernel - size, 0)
    return out, total // 2, total - total // 2


class Conv2d(Layer):
    """Cross-correlation with zero 'same' padding (default) or 'valid'."""

    def __init__(self, in_channels: int, filters: int, kernel: int, stride: int = 1,
                 padding: str = "same"):
        if padding not in ("same", "valid"):
            raise ShapeMismatch(f"unknown padding {padding!r}")
        self.kernel = kernel
        self.stride = stride
        self.padding = padding
        self.in_channels = in_channels
        self.filters = filters
        self.w = Parameter(np.zeros((kernel, kernel, in_channels, filters)))
        self.b = Parameter(np.zeros(filters), decay=False)

    def params(self):
        return [self.w, self.b]

    def _geometry(self, h, w):
        if self.padding == "same":
            h_out, pt, pb = _same_pad(h, self.stride, self.kernel)
            w_out, pl, pr = _same_pad(w, self.stride, self.kernel)
        else:
            if h < self.kernel or w < self.kernel:
                raise ShapeMismatch(f"input {h}x{w} smaller than kernel {self.kernel}")
            h_out = (h - self.kernel) // self.stride + 1
            w_out = (w - self.kernel) // self.stride + 1
            pt = pb = pl = pr = 0
        return h_out, w_out, (pt, pb, pl, pr)

    def out_shape(self, in_shape):
        if len(in_shape) != 3 or in_shape[2] != self.in_channels:
            raise ShapeMismatch(f"conv2d expects (H, W, {self.in_channels}), got {in_shape}")
        h_out, w_out, _ = self._geometry(in_shape[0], in_shape[1])
        return (h_out, w_out, self.filters)

    def forward(self, x, train=False, rng=None):
        b, h, w, c = x.shape
        h_out, w_out, (pt, pb, pl, pr) = self._geometry(h, w)
        xp = np.pad(x, ((0, 0), (pt, pb), (pl, pr), (0, 0)))
        k, s = self.kernel, self.stride
        cols = np.empty((b, h_out, w_out, k * k * c))
        for i in range(k):
            for j in range(k):
                patch = xp[:, i:i + h_out * s:s, j:j + w_out * s:s, :]
                cols[..., (i * k + j) * c:(i * k + j + 1) * c] = patch
        self._cols = cols
        self._x_shape = x.shape
        self._pads = (pt, pb, pl, pr)
        self._out_hw = (h_out, w_out)
        wmat = self.w.value.reshape(k * k * c, self.filters)
        return cols @ wmat + self.b.value

    def backward(self, dy):
        b, h, w, c = self._x_shape
        h_out, w_out = self._out_hw
        pt, pb, pl, pr = self._pads
        k, s = self.kernel, self.stride
        wmat = self.w.value.reshape(k * k * c, self.filters)
        cols_flat = self._cols.reshape(-1, k * k * c)
        dy_flat = dy.reshape(-1, self.filters)
        self.w.grad += (cols_flat.T @ dy_flat).reshape(self.w.value.shape)
        self.b.grad += dy_flat.sum(axis=0)
        dcols = (dy_flat @ wmat.T).reshape(b, h_out, w_out, k * k * c)
        dxp = np.zeros((b, h + pt + pb, w + pl + pr, c))
        for i in range(k):
            for j in range(k):
                dxp[:, i:i + h_out * s:s, j:j + w_out * s:s, :] += \
                    dcols[..., (i * k + j) * c:(i * k + j + 1) * c]
        return dxp[:, pt:pt + h, pl:pl + w, :]


class MaxPool(Layer):
    """Window max; gradient routes to the argmax cell, first in the
    row-major window scan on ties."""

    def __init__(self, size: int = 2, stride: int = 2):
        self.size = size
        self.stride = stride

    def out_shape(self, in_shape):
        if len(in_shape) != 3:
            raise ShapeMismatch(f"maxpool expects (H, W, C), got {in_shape}")
        h, w, c = in_shape
        if h < self.size or w < self.size:
            raise ShapeMismatch(f"input {h}x{w} smaller than pool size {self.size}")
        return ((h - self.size) // self.stride + 1,
                (w - self.size) // self.stride + 1, c)

    def forward(self, x, train=False, rng=None):
        b, h, w, c = x.shape
        h_out = (h - self.size) // self.stride + 1
        w_out = (w - self.size) // self.stride + 1
        k, s = self.size, self.stride
        windows = np.stack(
            [x[:, i:i + h_out * s:s, j:j + w_out * s:s, :]
             for i in range(k) for j in range(k)], axis=-1)
        self._argmax = windows.argmax(axis=-1)  # first max in scan order
        self._x_shape = x.shape
        return np.take_along_axis(windows, self._argmax[..., None], axis=-1)[..., 0]

    def backward(self, dy):
        b, h, w, c = self._x_shape
        k, s = self.size, self.stride
        h_out, w_out = dy.shape[1], dy.shape[2]
        dx = np.zeros(self._x_shape)
        for slot in range(k * k):
            i, j = divmod(slot, k)
            mask = self._argmax == slot
            dx[:, i:i + h_out * s:s, j:j + w_out * s:s, :] += np.where(mask, dy, 0.0)
        return dx


class Relu(Layer):
    def out_shape(self, in_shape):
        return in_shape

    def forward(self, x, train=False, rng=None):
        self._mask = x > 0
        return np.where(self._mask, x, 0.0)

    def backward(self, dy):
        return np.where(self._mask, dy, 0.0)


class Dropout(Layer):
    """Inverted dropout: train-time Bernoulli(keep) mask scaled by 1/keep,
    identity at evaluation time."""

    def __init__(self, keep: float):
        if not 0.0 < keep <= 1.0:
            raise ShapeMismatch(f"keep probability must be in (0, 1], got {keep}")
        self.keep = keep

    def out_shape(self, in_shape):
        return in_shape

    def forward(self, x, train=False, rng=None):
        if not train or self.keep == 1.0:
            self._mask = None
            return x
        if rng is None:
            raise ValueError("dropout in train mode needs an rng")
        self._mask = (rng.random(x.shape) < self.keep) / self.keep
        return x * self._mask

    def backward(self, dy):
        if self._mask is None:
            return dy
        return dy * self._mask


class Flatten(Layer):
    def out_shape(self, in_shape):
        n = 1
        for d in in_shape:
            n *= d
        return (n,)

    def forward(self, x, train=False, rng=None):
        self._shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, dy):
        return dy.reshape(self._shape)
