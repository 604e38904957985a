"""Network specification, shape validation, training loop, persistence.

A NetworkSpec is declarative: an ordered list of layer descriptors plus a
loss, an optimizer, an init scheme, and a seed. Shapes are chained and
validated before any parameter is allocated; training refuses to start on
a spec that does not end in exactly one scalar output.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from ..config import derive_seed
from ..errors import NonFiniteLoss, ShapeMismatch
from ..persist import pack_array, unpack_array
from .layers import Conv2d, Dense, Dropout, Flatten, MaxPool, Relu
from .losses import LOSSES
from .optim import make_optimizer

FORMAT_VERSION = 1


@dataclass(frozen=True)
class LayerSpec:
    kind: str       # dense | conv2d | maxpool | relu | dropout | flatten
    args: dict = field(default_factory=dict)


@dataclass
class NetworkSpec:
    name: str
    input_shape: tuple
    layers: list
    loss: str = "l1"
    optimizer: str = "adam"
    optimizer_args: dict = field(default_factory=dict)
    init_scheme: str = "normal"
    init_std: float = 0.1
    seed: int = 0
    expected_flat: int | None = None  # pinned flatten width, validated

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "input_shape": list(self.input_shape),
            "layers": [{"kind": l.kind, "args": l.args} for l in self.layers],
            "loss": self.loss,
            "optimizer": self.optimizer,
            "optimizer_args": self.optimizer_args,
            "init_scheme": self.init_scheme,
            "init_std": self.init_std,
            "seed": self.seed,
            "expected_flat": self.expected_flat,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NetworkSpec":
        return cls(
            name=d["name"],
            input_shape=tuple(d["input_shape"]),
            layers=[LayerSpec(l["kind"], dict(l["args"])) for l in d["layers"]],
            loss=d["loss"],
            optimizer=d["optimizer"],
            optimizer_args=dict(d["optimizer_args"]),
            init_scheme=d["init_scheme"],
            init_std=d["init_std"],
            seed=d["seed"],
            expected_flat=d.get("expected_flat"),
        )


def _instantiate(spec: LayerSpec, in_shape: tuple):
    kind, args = spec.kind, spec.args
    if kind == "dense":
        if len(in_shape) != 1:
            raise ShapeMismatch(f"dense needs a flat input, got {in_shape}")
        return Dense(in_shape[0], args["units"])
    if kind == "conv2d":
        if len(in_shape) != 3:
            raise ShapeMismatch(f"conv2d needs (H, W, C) input, got {in_shape}")
        return Conv2d(in_shape[2], args["filters"], args["kernel"],
                      args.get("stride", 1), args.get("padding", "same"))
    if kind == "maxpool":
        return MaxPool(args.get("size", 2), args.get("stride", 2))
    if kind == "relu":
        return Relu()
    if kind == "dropout":
        return Dropout(args["keep"])
    if kind == "flatten":
        return Flatten()
    raise ShapeMismatch(f"unknown layer kind {kind!r}")


def validate_spec(spec: NetworkSpec) -> tuple:
    """Chain shapes through every layer; returns the output shape.

    Raises ShapeMismatch when shapes do not chain, when a pinned flatten
    width is broken, or when the network does not end in one scalar."""
    shape = tuple(spec.input_shape)
    for lspec in spec.layers:
        layer = _instantiate(lspec, shape)
        shape = layer.out_shape(shape)
        if lspec.kind == "flatten" and spec.expected_flat is not None \
                and shape[0] != spec.expected_flat:
            raise ShapeMismatch(
                f"{spec.name}: flatten width {shape[0]} != pinned {spec.expected_flat}")
    if shape != (1,):
        raise ShapeMismatch(f"{spec.name}: output shape {shape} is not a single scalar")
    return shape


class Network:
    """Instantiated layers with allocated parameters."""

    def __init__(self, spec: NetworkSpec):
        validate_spec(spec)
        self.spec = spec
        self.layers = []
        shape = tuple(spec.input_shape)
        for lspec in spec.layers:
            layer = _instantiate(lspec, shape)
            shape = layer.out_shape(shape)
            self.layers.append(layer)
        self._init_params()

    def _init_params(self):
        rng = np.random.default_rng(derive_seed(self.spec.seed, "init"))
        for layer in self.layers:
            for p in layer.params():
                if not p.decay:
                    continue  # biases stay zero
                if self.spec.init_scheme == "xavier":
                    if isinstance(layer, Dense):
                        fan_in, fan_out = p.value.shape[1], p.value.shape[0]
                    else:
                        k, _, cin, cout = p.value.shape
                        fan_in, fan_out = k * k * cin, k * k * cout
                    std = np.sqrt(2.0 / (fan_in + fan_out))
                else:
                    std = self.spec.init_std
                p.value[...] = rng.normal(0.0, std, p.value.shape)

    def params(self) -> list:
        out = []
        for layer in self.layers:
            out.extend(layer.params())
        return out

    def forward(self, x: np.ndarray, train: bool = False, rng=None) -> np.ndarray:
        for layer in self.layers:
            x = layer.forward(x, train=train, rng=rng)
        return x

    def backward(self, dloss: np.ndarray) -> np.ndarray:
        for layer in reversed(self.layers):
            dloss = layer.backward(dloss)
        return dloss

    def zero_grads(self):
        for p in self.params():
            p.zero_grad()

    def predict(self, X: np.ndarray, batch: int = 64) -> np.ndarray:
        outs = []
        for i in range(0, X.shape[0], batch):
            outs.append(self.forward(X[i:i + batch], train=False).reshape(-1))
        return np.concatenate(outs)


def train_network(spec: NetworkSpec, data: np.ndarray, labels: np.ndarray,
                  iters: int, batch: int = 17, l2: float = 0.01,
                  log_every: int = 100) -> tuple:
    """Seeded minibatch training loop; returns (network, trajectory).

    Batches are drawn with replacement. The L2 penalty is added to weight
    gradients only, never biases. The trajectory holds (iteration,
    data loss) every log_every iterations plus the final one.
    """
    network = Network(spec)
    labels = np.asarray(labels, dtype=float).reshape(-1, 1)
    if data.shape[0] != labels.shape[0]:
        raise ShapeMismatch(f"{data.shape[0]} samples vs {labels.shape[0]} labels")
    loss_fn = LOSSES[spec.loss]
    optimizer = make_optimizer(spec.optimizer, **spec.optimizer_args)
    batch_rng = np.random.default_rng(derive_seed(spec.seed, "batch"))
    dropout_rng = np.random.default_rng(derive_seed(spec.seed, "dropout"))
    params = network.params()
    trajectory = []
    for it in range(1, iters + 1):
        idx = batch_rng.integers(0, data.shape[0], batch)
        network.zero_grads()
        pred = network.forward(data[idx], train=True, rng=dropout_rng)
        loss, dloss = loss_fn(pred, labels[idx])
        if not np.isfinite(loss):
            raise NonFiniteLoss(f"{spec.name}: loss became {loss} at iteration {it}")
        network.backward(dloss)
        if l2 > 0:
            for p in params:
                if p.decay:
                    p.grad += l2 * p.value
        optimizer.step(params)
        if it % log_every == 0 or it == iters:
            trajectory.append((it, loss))
    return network, trajectory


# -- persistence -----------------------------------------------------------------

def network_to_dict(network: Network, optimizer=None) -> dict:
    doc = {
        "format_version": FORMAT_VERSION,
        "kind": "network",
        "spec": network.spec.to_dict(),
        "params": [pack_array(p.value) for p in network.params()],
    }
    if optimizer is not None:
        doc["optimizer_state"] = optimizer.state_dict()
    return doc


def network_from_dict(doc: dict) -> Network:
    network = Network(NetworkSpec.from_dict(doc["spec"]))
    params = network.params()
    packed = doc["params"]
    if len(params) != len(packed):
        raise ShapeMismatch("parameter count mismatch in model file")
    for p, d in zip(params, packed):
        p.value[...] = unpack_array(d)
    return network


def save_network(network: Network, path) -> None:
    with open(path, "w") as fh:
        json.dump(network_to_dict(network), fh)
        fh.write("\n")


def load_network(path) -> Network:
    with open(path) as fh:
        return network_from_dict(json.load(fh))


def export_train_log(trajectory, path) -> None:
    with open(path, "w") as fh:
        fh.write("iteration,loss\n")
        for it, loss in trajectory:
            fh.write(f"{it},{loss!r}\n")
