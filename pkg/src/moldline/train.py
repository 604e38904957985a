"""Orchestration: leakage-guarded standardization, CV, grid search, comparison runs.

Every fitted statistic (feature means/stds, label mean/std, per-pixel image
stats, per-channel signal stats) is computed from training rows only and
recorded, so the leakage assertion can recompute them with the test rows
physically deleted and demand bitwise equality.
"""
from __future__ import annotations

import dataclasses
import itertools
import json
import time
from dataclasses import dataclass, field

import numpy as np

from . import regress
from .config import PipelineConfig, derive_seed
from .descriptors import (SOURCE_IMAGE, SOURCE_SIGNAL_PEAKS, SOURCE_SIGNAL_RAW,
                          FeatureMatrix)
from .errors import BadModelKind
from .featsel import make_folds
from .lstm import frame_signals, predict_lstm, train_lstm
from .nn.architectures import build_paper_architectures
from .nn.network import train_network
from .preprocess import downscale_image, resample_linear

REGIMES = {
    "signals": (SOURCE_SIGNAL_RAW, SOURCE_SIGNAL_PEAKS),
    "thermo": (SOURCE_IMAGE,),
    "both": (SOURCE_SIGNAL_RAW, SOURCE_SIGNAL_PEAKS, SOURCE_IMAGE),
}

NETWORK_KINDS = ("mlp_2fc", "cnn1_fc1", "cnn2_fc1", "cnn2_fc2", "cnn3_fc2",
                 "lstm1", "lstm2")


# -- leakage-guarded standardization ------------------------------------------

@dataclass
class ColumnStats:
    mean: np.ndarray
    std: np.ndarray          # 1.0 substituted where the observed column was constant
    zero_std: np.ndarray     # flag per column


def fit_feature_stats(fm: FeatureMatrix, rows) -> ColumnStats:
    """Column mean/std over the OBSERVED (non-imputed) cells of given rows."""
    values = fm.values[rows]
    observed = ~fm.impute_mask[rows]
    n_obs = observed.sum(axis=0)
    safe_n = np.maximum(n_obs, 1)
    mean = np.where(n_obs > 0, (values * observed).sum(axis=0) / safe_n, 0.0)
    centered = np.where(observed, values - mean, 0.0)
    var = np.where(n_obs > 0, (centered ** 2).sum(axis=0) / safe_n, 0.0)
    std = np.sqrt(var)
    zero = std == 0.0
    return ColumnStats(mean=mean, std=np.where(zero, 1.0, std), zero_std=zero)


def apply_feature_stats(fm: FeatureMatrix, rows, stats: ColumnStats) -> np.ndarray:
    """Z-score rows; imputed cells become exactly 0 (the train column mean)."""
    values = fm.values[rows]
    z = (values - stats.mean) / stats.std
    z = np.where(fm.impute_mask[rows], 0.0, z)
    z = np.where(stats.zero_std, 0.0, z)
    return z


# -- cross validation and grid search -------------------------------------------

def kfold_cv(kind: str, params: dict, fm, y, k: int = 5, seed: int = 0) -> dict:
    """Seeded shuffled k-fold CV; statistics are re-fit per fold.

    k == n rows degenerates to leave-one-out where per-fold R^2 is
    undefined, so scores pool the held-out residuals instead (flagged).
    """
    y = np.asarray(y, dtype=float)
    n = y.size
    folds = make_folds(n, k, seed)
    pooled = k >= n
    r2s, mses = [], []
    all_pred = np.empty(n)
    for train_idx, test_idx in folds:
        if isinstance(fm, FeatureMatrix):
            stats = fit_feature_stats(fm, train_idx)
            X_train = apply_feature_stats(fm, train_idx, stats)
            X_test = apply_feature_stats(fm, test_idx, stats)
        else:
            X = np.asarray(fm, dtype=float)
            mean = X[train_idx].mean(axis=0)
            std = X[train_idx].std(axis=0)
            std = np.where(std > 0, std, 1.0)
            X_train = (X[train_idx] - mean) / std
            X_test = (X[test_idx] - mean) / std
        model = regress.make_regressor(kind, params, seed=derive_seed(seed, f"cv-{kind}"))
        model.fit(X_train, y[train_idx])
        pred = model.predict(X_test)
        all_pred[test_idx] = pred
        if not pooled:
            mse, r2 = regress.scores(y[test_idx], pred)
            mses.append(mse)
            r2s.append(r2)
    if pooled:
        mse, r2 = regress.scores(y, all_pred)
        return {"mean_r2": r2, "std_r2": 0.0, "mean_mse": mse, "std_mse": 0.0,
                "pooled": True}
    return {"mean_r2": float(np.mean(r2s)), "std_r2": float(np.std(r2s)),
            "mean_mse": float(np.mean(mses)), "std_mse": float(np.std(mses)),
            "pooled": False}


def grid_search(kind: str, grid: dict, fm, y, k: int = 5, seed: int = 0) -> tuple:
    """Exhaustive search in declared grid order; best by mean CV R^2,
    first combination winning ties."""
    keys = list(grid.keys())
    combos = [dict(zip(keys, values))
              for values in itertools.product(*(grid[k] for k in keys))] or [{}]
    table = []
    best = None
    for combo in combos:
        cv = kfold_cv(kind, combo, fm, y, k=k, seed=seed)
        table.append({"params": combo, **cv})
        if best is None or cv["mean_r2"] > best[1]["mean_r2"]:
            best = (combo, cv)
    return best[0], table


# -- train reports ----------------------------------------------------------------

@dataclass
class TrainReport:
    model: str
    regime: str
    hyperparams: dict
    seed: int
    n_train: int
    n_test: int
    split_seed: int
    n_features: int
    mse: float
    r2: float
    seconds: float
    manifest_hash: str | None = None
    cv: dict | None = None
    trajectory: list | None = None
    decisions: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)
            fh.write("\n")

    @classmethod
    def from_dict(cls, d: dict) -> "TrainReport":
        return cls(**d)


def write_scores_csv(reports, path) -> None:
    with open(path, "w") as fh:
        fh.write("model,regime,n_features,mse,r2,seconds,seed\n")
        for r in reports:
            fh.write(f"{r.model},{r.regime},{r.n_features},{r.mse!r},{r.r2!r},"
                     f"{r.seconds:.3f},{r.seed}\n")


def format_ranking(reports) -> str:
    """Plain-text comparison table, best test R^2 first."""
    rows = sorted(reports, key=lambda r: r.r2, reverse=True)
    lines = [f"{'model':<14} {'regime':<12} {'n_feat':>6} {'mse':>12} {'r2':>8}",
             "-" * 56]
    for r in rows:
        lines.append(f"{r.model:<14} {r.regime:<12} {r.n_features:>6} "
                     f"{r.mse:>12.5f} {r.r2:>8.4f}")
    return "\n".join(lines)


# -- classical pipeline -------------------------------------------------------------

def labels_for(records, cycle_ids) -> np.ndarray:
    by_id = {r.cycle_id: r for r in records}
    return np.array([by_id[cid].width_mm for cid in cycle_ids], dtype=float)


def regime_matrix(fm: FeatureMatrix, regime: str) -> FeatureMatrix:
    return fm.select(fm.manifest.columns_for(REGIMES[regime]))


def run_classical(kind: str, params: dict, fm: FeatureMatrix, records,
                  train_ids, test_ids, seed: int, regime: str = "both",
                  with_cv: bool = False, cv_folds: int = 5) -> tuple:
    """Fit one classical model on train rows, score on test rows.

    Returns (TrainReport, fitted model, fitted stats)."""
    t0 = time.perf_counter()
    train_rows = [fm.cycle_ids.index(cid) for cid in train_ids]
    test_rows = [fm.cycle_ids.index(cid) for cid in test_ids]
    stats = fit_feature_stats(fm, train_rows)
    X_train = apply_feature_stats(fm, train_rows, stats)
    X_test = apply_feature_stats(fm, test_rows, stats)
    y_train = labels_for(records, train_ids)
    y_test = labels_for(records, test_ids)
    model = regress.make_regressor(kind, params, seed=derive_seed(seed, f"fit-{kind}"))
    model.fit(X_train, y_train)
    mse, r2 = regress.evaluate(model, X_test, y_test)
    cv = kfold_cv(kind, params, fm.rows(train_ids), y_train,
                  k=cv_folds, seed=seed) if with_cv else None
    report = TrainReport(
        model=kind, regime=regime, hyperparams=dict(params), seed=seed,
        n_train=len(train_ids), n_test=len(test_ids), split_seed=seed,
        n_features=fm.values.shape[1], mse=mse, r2=r2,
        seconds=time.perf_counter() - t0,
        manifest_hash=fm.manifest.hash, cv=cv,
        decisions={"feature_standardization": "train_rows_population_std",
                   "imputation": "train_column_mean"},
    )
    return report, model, stats


# -- neural data preparation ---------------------------------------------------------

@dataclass
class ImageStats:
    pixel_mean: np.ndarray   # (H, W, 1) per-pixel-position over the train corpus
    pixel_std: np.ndarray
    label_mean: float
    label_std: float


def image_tensors(records, cycle_ids, config: PipelineConfig) -> np.ndarray:
    side = config.nn.image_size
    by_id = {r.cycle_id: r for r in records}
    stack = np.stack([
        downscale_image(by_id[cid].image, side, side).as_array()[..., None]
        for cid in cycle_ids])
    return stack


def fit_image_stats(train_images: np.ndarray, y_train: np.ndarray) -> ImageStats:
    mean = train_images.mean(axis=0)
    std = train_images.std(axis=0)
    std = np.where(std > 0, std, 1.0)
    return ImageStats(pixel_mean=mean, pixel_std=std,
                      label_mean=float(y_train.mean()),
                      label_std=float(y_train.std()) or 1.0)


@dataclass
class SignalStats:
    channel_mean: np.ndarray  # (n_channels,) over the train corpus
    channel_std: np.ndarray
    label_mean: float
    label_std: float


def signal_blocks(records, cycle_ids, config: PipelineConfig) -> np.ndarray:
    """[n, resample_points, 4] blocks in canonical channel order."""
    from .config import CHANNELS
    by_id = {r.cycle_id: r for r in records}
    n_points = config.lstm.resample_points
    blocks = []
    for cid in cycle_ids:
        rec = by_id[cid]
        block = np.stack([resample_linear(rec.trace(ch), n_points)
                          for ch in CHANNELS], axis=1)
        blocks.append(block)
    return np.stack(blocks)


def fit_signal_stats(train_blocks: np.ndarray, y_train: np.ndarray) -> SignalStats:
    mean = train_blocks.mean(axis=(0, 1))
    std = train_blocks.std(axis=(0, 1))
    std = np.where(std > 0, std, 1.0)
    return SignalStats(channel_mean=mean, channel_std=std,
                       label_mean=float(y_train.mean()),
                       label_std=float(y_train.std()) or 1.0)


def run_network(name: str, records, train_ids, test_ids, config: PipelineConfig,
                seed: int, iters: int | None = None) -> tuple:
    """Train one neural model on raw tensors; returns (TrainReport, payload).

    payload carries everything needed to persist and re-evaluate the model:
    the trained network or LSTM, the fitted input statistics, and the label
    transform."""
    t0 = time.perf_counter()
    y_train = labels_for(records, train_ids)
    y_test = labels_for(records, test_ids)
    if name.startswith("lstm"):
        n_layers = 2 if name.endswith("2") else 1
        blocks_train = signal_blocks(records, train_ids, config)
        blocks_test = signal_blocks(records, test_ids, config)
        stats = fit_signal_stats(blocks_train, y_train)
        z_train = (blocks_train - stats.channel_mean) / stats.channel_std
        z_test = (blocks_test - stats.channel_mean) / stats.channel_std
        frames_train = np.stack([
            frame_signals(b, config.lstm.frame_steps, config.lstm.framing)
            for b in z_train])
        frames_test = np.stack([
            frame_signals(b, config.lstm.frame_steps, config.lstm.framing)
            for b in z_test])
        labels_z = (y_train - stats.label_mean) / stats.label_std
        iters = config.lstm.iterations if iters is None else iters
        model, trajectory = train_lstm(frames_train, labels_z, config.lstm,
                                       n_layers=n_layers, iters=iters,
                                       seed=derive_seed(seed, name))
        pred_z = predict_lstm(model, frames_test)
        decisions = {"framing": config.lstm.framing,
                     "frame_steps": config.lstm.frame_steps,
                     "clip_norm": config.lstm.clip_norm,
                     "signal_standardization": "per_channel_train_corpus"}
        n_features = frames_train.shape[1] * frames_train.shape[2]
    else:
        if name not in ("mlp_2fc", "cnn1_fc1", "cnn2_fc1", "cnn2_fc2", "cnn3_fc2"):
            raise BadModelKind(name, NETWORK_KINDS)
        images_train = image_tensors(records, train_ids, config)
        images_test = image_tensors(records, test_ids, config)
        stats = fit_image_stats(images_train, y_train)
        z_train = (images_train - stats.pixel_mean) / stats.pixel_std
        z_test = (images_test - stats.pixel_mean) / stats.pixel_std
        labels_z = (y_train - stats.label_mean) / stats.label_std
        spec = build_paper_architectures(config.nn, seed=derive_seed(seed, name))[name]
        iters = config.nn.iterations.get(name, 10_000) if iters is None else iters
        model, trajectory = train_network(
            spec, z_train, labels_z, iters=iters, batch=config.nn.batch_size,
            l2=config.nn.l2_penalty)
        pred_z = model.predict(z_test)
        decisions = {"dropout_is_keep": config.nn.dropout_is_keep,
                     "image_standardization": "per_pixel_position_train_corpus",
                     "init_scheme": config.nn.init_scheme}
        n_features = int(np.prod(z_train.shape[1:]))
    pred = pred_z * stats.label_std + stats.label_mean
    mse, r2 = regress.scores(y_test, pred)
    report = TrainReport(
        model=name, regime="raw_signals" if name.startswith("lstm") else "raw_images",
        hyperparams={"iterations": iters}, seed=seed,
        n_train=len(train_ids), n_test=len(test_ids), split_seed=seed,
        n_features=n_features, mse=mse, r2=r2,
        seconds=time.perf_counter() - t0, trajectory=trajectory,
        decisions=decisions,
    )
    return report, {"model": model, "stats": stats}


# -- full comparison --------------------------------------------------------------------

def compare_all(fm: FeatureMatrix, records, train_ids, test_ids,
                config: PipelineConfig, network_iters: dict | None = None) -> list:
    """One report per enabled (classical model x regime) plus raw-input networks."""
    reports = []
    for regime in ("signals", "thermo", "both"):
        sub = regime_matrix(fm, regime)
        for kind in config.train.classical_models:
            params = config.model_params.get(kind, {})
            report, _model, _stats = run_classical(
                kind, params, sub, records, train_ids, test_ids,
                seed=config.seed, regime=regime)
            reports.append(report)
    for name in config.train.networks:
        iters = (network_iters or {}).get(name)
        report, _payload = run_network(name, records, train_ids, test_ids,
                                       config, seed=config.seed, iters=iters)
        reports.append(report)
    return reports


# -- leakage guard -----------------------------------------------------------------------

def collect_fitted_statistics(fm: FeatureMatrix, records, train_ids,
                              config: PipelineConfig) -> dict:
    """Every statistic the pipeline fits, computed from train rows only.

    The leakage assertion recomputes this dict on a dataset with the test
    rows deleted and requires exact array equality."""
    train_rows = [fm.cycle_ids.index(cid) for cid in train_ids]
    stats = fit_feature_stats(fm, train_rows)
    y_train = labels_for(records, train_ids)
    images = image_tensors(records, train_ids, config)
    image_stats = fit_image_stats(images, y_train)
    blocks = signal_blocks(records, train_ids, config)
    signal_stats = fit_signal_stats(blocks, y_train)
    return {
        "feature_mean": stats.mean,
        "feature_std": stats.std,
        "label_mean": np.array([image_stats.label_mean]),
        "label_std": np.array([image_stats.label_std]),
        "pixel_mean": image_stats.pixel_mean,
        "pixel_std": image_stats.pixel_std,
        "channel_mean": signal_stats.channel_mean,
        "channel_std": signal_stats.channel_std,
    }


def assert_no_leakage(stats_full: dict, stats_trimmed: dict) -> None:
    for key, value in stats_full.items():
        other = stats_trimmed[key]
        if not np.array_equal(np.asarray(value), np.asarray(other)):
            raise AssertionError(f"fitted statistic {key!r} changed when test rows "
                                 "were removed: training leaked test information")
