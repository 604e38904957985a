"""Regression losses with gradients w.r.t. the prediction.

Each returns (loss, grad); gradients are averaged over all elements so the
batch size never rescales the learning rate.
"""
from __future__ import annotations

import numpy as np


def l1(pred, target):
    e = pred - target
    return float(np.abs(e).mean()), np.sign(e) / e.size


def mse(pred, target):
    e = pred - target
    return float((e ** 2).mean()), 2.0 * e / e.size


def rmse(pred, target):
    e = pred - target
    value = float(np.sqrt((e ** 2).mean()))
    if value == 0.0:
        return 0.0, np.zeros_like(e)
    return value, e / (e.size * value)


def huber(pred, target, delta: float = 1.0):
    e = pred - target
    absolute = np.abs(e)
    quadratic = 0.5 * e ** 2
    linear = delta * (absolute - 0.5 * delta)
    loss = float(np.where(absolute <= delta, quadratic, linear).mean())
    grad = np.clip(e, -delta, delta) / e.size
    return loss, grad


LOSSES = {"l1": l1, "mse": mse, "rmse": rmse, "huber": huber}
