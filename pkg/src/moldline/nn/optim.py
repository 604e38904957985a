"""First-order optimizers with serializable state.

Adam follows the bias-corrected form with the suggested defaults (0.9 first
moment decay, 0.999 second moment, 1e-8 epsilon).
"""
from __future__ import annotations

import numpy as np

from ..persist import pack_array, unpack_array


class Optimizer:
    name = "base"

    def step(self, params) -> None:
        raise NotImplementedError

    def state_dict(self) -> dict:
        return {}

    def load_state(self, state: dict) -> None:
        pass

    def args(self) -> dict:
        return {}


class Sgd(Optimizer):
    name = "sgd"

    def __init__(self, lr: float = 0.001):
        self.lr = lr

    def args(self):
        return {"lr": self.lr}

    def step(self, params):
        for p in params:
            p.value -= self.lr * p.grad


class RmsProp(Optimizer):
    name = "rmsprop"

    def __init__(self, lr: float = 0.001, decay: float = 0.9, eps: float = 1e-8):
        self.lr = lr
        self.decay = decay
        self.eps = eps
        self.v = None

    def args(self):
        return {"lr": self.lr, "decay": self.decay, "eps": self.eps}

    def step(self, params):
        if self.v is None:
            self.v = [np.zeros_like(p.value) for p in params]
        for p, v in zip(params, self.v):
            v *= self.decay
            v += (1.0 - self.decay) * p.grad ** 2
            p.value -= self.lr * p.grad / (np.sqrt(v) + self.eps)

    def state_dict(self):
        return {"v": [pack_array(v) for v in self.v or []]}

    def load_state(self, state):
        self.v = [unpack_array(d) for d in state["v"]] or None


class Adam(Optimizer):
    name = "adam"

    def __init__(self, lr: float = 0.001, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = None
        self.v = None

    def args(self):
        return {"lr": self.lr, "beta1": self.beta1, "beta2": self.beta2, "eps": self.eps}

    def step(self, params):
        if self.m is None:
            self.m = [np.zeros_like(p.value) for p in params]
            self.v = [np.zeros_like(p.value) for p in params]
        self.t += 1
        correct1 = 1.0 - self.beta1 ** self.t
        correct2 = 1.0 - self.beta2 ** self.t
        for p, m, v in zip(params, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * p.grad
            v *= self.beta2
            v += (1.0 - self.beta2) * p.grad ** 2
            m_hat = m / correct1
            v_hat = v / correct2
            p.value -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)

    def state_dict(self):
        return {"t": self.t,
                "m": [pack_array(m) for m in self.m or []],
                "v": [pack_array(v) for v in self.v or []]}

    def load_state(self, state):
        self.t = int(state["t"])
        self.m = [unpack_array(d) for d in state["m"]] or None
        self.v = [unpack_array(d) for d in state["v"]] or None


OPTIMIZERS = {"sgd": Sgd, "rmsprop": RmsProp, "adam": Adam}


def make_optimizer(name: str, **kwargs) -> Optimizer:
    if name not in OPTIMIZERS:
        raise ValueError(f"unknown optimizer {name!r}; valid: {sorted(OPTIMIZERS)}")
    return OPTIMIZERS[name](**kwargs)
