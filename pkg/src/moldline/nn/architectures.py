"""The image-network zoo: one MLP and four CNN variants on 28x28x1 inputs.

The deepest-known-good variant pins its flatten width to 3136 (7*7*64 after
two stride-2 poolings of a same-padded 28x28 map); the validator rejects
any stride/padding combination that breaks that chain.
"""
from __future__ import annotations

from ..config import NnConfig
from .network import LayerSpec, NetworkSpec

MLP_HIDDEN = 128
CNN2_FLAT = 3136  # 7 * 7 * 64
FC1_WIDTH = 1024


def build_paper_architectures(config: NnConfig | None = None, seed: int = 0) -> dict:
    config = config or NnConfig()
    side = config.image_size
    input_shape = (side, side, 1)
    keep = config.dropout if config.dropout_is_keep else 1.0 - config.dropout

    def conv(filters, kernel):
        return LayerSpec("conv2d", {"filters": filters, "kernel": kernel,
                                    "stride": 1, "padding": "same"})

    pool = LayerSpec("maxpool", {"size": 2, "stride": 2})
    drop = LayerSpec("dropout", {"keep": keep})
    relu = LayerSpec("relu")
    flat = LayerSpec("flatten")

    def spec(name, layers, expected_flat=None):
        return NetworkSpec(
            name=name, input_shape=input_shape, layers=layers,
            loss=config.loss, optimizer=config.optimizer,
            optimizer_args={"lr": config.learning_rate},
            init_scheme=config.init_scheme, init_std=config.init_std,
            seed=seed, expected_flat=expected_flat)

    f3_1, f3_2, f3_3 = config.cnn3_filters
    return {
        "mlp_2fc": spec("mlp_2fc", [
            flat,
            LayerSpec("dense", {"units": MLP_HIDDEN}),
            relu,
            LayerSpec("dense", {"units": 1}),
        ]),
        "cnn1_fc1": spec("cnn1_fc1", [
            conv(32, 5), pool, drop, relu, flat,
            LayerSpec("dense", {"units": 1}),
        ]),
        "cnn2_fc1": spec("cnn2_fc1", [
            conv(32, 5), pool, conv(64, 5), pool, drop, relu, flat,
            LayerSpec("dense", {"units": 1}),
        ], expected_flat=CNN2_FLAT if side == 28 else None),
        "cnn2_fc2": spec("cnn2_fc2", [
            conv(32, 5), pool, conv(64, 5), pool, drop, relu, flat,
            LayerSpec("dense", {"units": FC1_WIDTH}),
            LayerSpec("dense", {"units": 1}),
        ], expected_flat=CNN2_FLAT if side == 28 else None),
        "cnn3_fc2": spec("cnn3_fc2", [
            conv(f3_1, 3), pool, conv(f3_2, 3), pool, conv(f3_3, 3), pool,
            drop, relu, flat,
            LayerSpec("dense", {"units": FC1_WIDTH}),
            LayerSpec("dense", {"units": 1}),
        ]),
    }
