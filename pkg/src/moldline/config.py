"""Dataclass configuration tree and the single JSON config file behind the CLI.

All randomness in the pipeline flows from one master seed through named
sub-seeds (see :func:`derive_seed`), so a run is fully described by
(config JSON, master seed, dataset hash).
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field

from .errors import BadConfig

CHANNELS = ("InMoldPressure", "InMoldTemperature", "HydraulicPressure", "ScrewPosition")


def derive_seed(master: int, name: str) -> int:
    """Stable named sub-seed: independent streams for split/init/dropout/etc."""
    digest = hashlib.sha256(f"{master}:{name}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


@dataclass
class CwtConfig:
    scales: tuple = tuple(range(1, 33))
    min_ridge_length: int | None = None     # None -> ceil(len(scales) / 4)
    min_snr: float = 1.0
    gap_threshold: int = 2                  # rows a ridge may skip before closing
    window_size: int | None = None          # None -> ceil(n / 20)
    # relative noise floor on the snr denominator: fraction of the global
    # max |coefficient|; keeps snr scale-free while rejecting ridges whose
    # response is negligible next to the strongest structure in the signal
    snr_floor_frac: float = 0.01
    # channels that get peak extraction (paper does not say which ones did)
    peak_channels: tuple = CHANNELS


@dataclass
class HaralickConfig:
    levels: int = 8
    offsets: tuple = ((0, 1), (1, 0), (1, 1), (1, -1))
    full_resolution: bool = True            # extract on the native 156x156 image


@dataclass
class DescriptorConfig:
    peak_stat_source: str = "heights"       # "heights" or "positions"
    include_peak_positions: bool = False


@dataclass
class FeatselConfig:
    correlation_threshold: float = 0.95
    cv_folds: int = 5


@dataclass
class NnConfig:
    batch_size: int = 17
    learning_rate: float = 1e-3
    l2_penalty: float = 0.01
    dropout: float = 0.90
    dropout_is_keep: bool = True            # 0.90 read as KEEP probability
    init_scheme: str = "normal"             # "normal" or "xavier"
    init_std: float = 0.1
    loss: str = "l1"
    optimizer: str = "adam"
    image_size: int = 28
    cnn3_filters: tuple = (32, 64, 64)
    iterations: dict = field(default_factory=lambda: {
        "mlp_2fc": 10_000,
        "cnn1_fc1": 10_000,
        "cnn2_fc1": 10_000,
        "cnn2_fc2": 10_000,
        "cnn3_fc2": 100_000,
    })


@dataclass
class LstmConfig:
    hidden_size: int = 30
    resample_points: int = 3000
    frame_steps: int = 100                  # 3000 * 4 channels -> 100 steps x 120 features
    framing: str = "chunked"                # "chunked" or "per_sample"
    batch_size: int = 17
    learning_rate: float = 1e-3
    iterations: int = 100_000
    clip_norm: float = 5.0
    loss: str = "mse"


@dataclass
class SynthConfig:
    n_cycles: int = 204
    noise_level: float = 0.05
    n_pressure_peaks: int = 3
    trace_samples: int = 3000
    length_jitter: float = 0.02
    image_size: int = 156


@dataclass
class TrainConfig:
    n_test: int = 27
    cv_folds: int = 5
    r2_aggregate: str = "mean"              # "mean" or "pooled"
    use_rfe_selection: bool = False
    classical_models: tuple = (
        "ols", "lasso", "elastic_net", "svr", "knn", "sgd",
        "tree", "bagging", "random_forest", "gbm", "adaboost",
    )
    networks: tuple = ("mlp_2fc", "cnn2_fc2", "lstm1")


def default_model_params() -> dict:
    """Per-kind hyperparameters as tuned in the source experiment."""
    return {
        "ols": {},
        "lasso": {"l1": 0.3162, "l2": 0.0},
        "elastic_net": {"l1": 0.00023, "l2": 0.00033},
        "svr": {"C": 1.0, "epsilon": 0.1, "epochs": 10_000},
        "knn": {"k": 2},
        "sgd": {"l1": 0.0001, "l2": 0.00067, "epochs": 5, "lr0": 0.01, "lr_power": 0.25},
        "tree": {"max_depth": 1, "min_samples_split": 2},
        "bagging": {"n_estimators": 10, "max_depth": None},
        "random_forest": {"n_trees": 100, "max_features": None},
        "gbm": {"n_stages": 500, "max_depth": 4, "min_samples_split": 2, "learning_rate": 0.1},
        "adaboost": {"n_estimators": 300, "learning_rate": 1.0, "base_max_depth": 3},
    }


def default_model_grids() -> dict:
    """Cross-validation search grids, centered on the shipped defaults."""
    return {
        "ols": {},
        "lasso": {"l1": [0.0316, 0.1, 0.3162, 1.0]},
        "elastic_net": {"l1": [0.0001, 0.00023, 0.001], "l2": [0.0001, 0.00033, 0.001]},
        "svr": {"C": [0.1, 1.0, 10.0]},
        "knn": {"k": [1, 2, 4, 8]},
        "sgd": {"epochs": [5, 20]},
        "tree": {"max_depth": [1, 2, 4]},
        "bagging": {"n_estimators": [10]},
        "random_forest": {"n_trees": [100]},
        "gbm": {"n_stages": [100, 500], "learning_rate": [0.05, 0.1]},
        "adaboost": {"n_estimators": [100, 300]},
    }


@dataclass
class PipelineConfig:
    seed: int = 7
    jobs: int = 1
    cwt: CwtConfig = field(default_factory=CwtConfig)
    haralick: HaralickConfig = field(default_factory=HaralickConfig)
    descriptors: DescriptorConfig = field(default_factory=DescriptorConfig)
    featsel: FeatselConfig = field(default_factory=FeatselConfig)
    nn: NnConfig = field(default_factory=NnConfig)
    lstm: LstmConfig = field(default_factory=LstmConfig)
    synth: SynthConfig = field(default_factory=SynthConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    model_params: dict = field(default_factory=default_model_params)
    model_grids: dict = field(default_factory=default_model_grids)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, default=_jsonable)
            fh.write("\n")

    @classmethod
    def from_dict(cls, data: dict) -> "PipelineConfig":
        cfg = cls()
        _apply_overrides(cfg, data)
        return cfg

    @classmethod
    def from_json(cls, path) -> "PipelineConfig":
        try:
            with open(path) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise BadConfig(f"cannot read config {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise BadConfig(f"config root must be a JSON object, got {type(data).__name__}")
        return cls.from_dict(data)


def _jsonable(obj):
    if isinstance(obj, tuple):
        return list(obj)
    raise TypeError(f"not JSON serializable: {obj!r}")


def _apply_overrides(obj, data: dict) -> None:
    """Recursively merge a plain dict onto a dataclass tree."""
    names = {f.name: f for f in dataclasses.fields(obj)}
    for key, value in data.items():
        if key not in names:
            raise BadConfig(f"unknown config key {key!r} in section {type(obj).__name__}")
        current = getattr(obj, key)
        if dataclasses.is_dataclass(current):
            if not isinstance(value, dict):
                raise BadConfig(f"config section {key!r} must be an object")
            _apply_overrides(current, value)
        elif isinstance(current, tuple):
            setattr(obj, key, _as_tuple(value))
        elif isinstance(current, dict):
            merged = dict(current)
            merged.update(value)
            setattr(obj, key, merged)
        else:
            setattr(obj, key, value)


def _as_tuple(value):
    if isinstance(value, (list, tuple)):
        return tuple(_as_tuple(v) for v in value)
    return value
