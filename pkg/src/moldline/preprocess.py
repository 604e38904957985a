"""Resampling, standardization, and image downscaling.

All functions are pure. Standardization statistics must be fit on the
training portion only; the train harness owns that discipline.
"""
from __future__ import annotations

import numpy as np

from .dataset import SignalTrace, ThermoImage
from .errors import BadDims, DegenerateConstant, EmptyTrace, ZeroStd


def resample_linear(trace: SignalTrace, n_out: int) -> np.ndarray:
    """Resample to n_out points by linear interpolation on a uniform grid.

    Endpoints are preserved exactly: output[0] = input[0] and
    output[-1] = input[-1].
    """
    samples = trace.samples if isinstance(trace, SignalTrace) \
        else np.asarray(trace, dtype=float)
    if samples.size == 0:
        raise EmptyTrace("cannot resample an empty trace")
    if n_out < 2:
        raise EmptyTrace(f"n_out must be >= 2, got {n_out}")
    positions = np.linspace(0.0, samples.size - 1, n_out)
    return np.interp(positions, np.arange(samples.size), samples)


def standardize_fit(values) -> tuple:
    """Sample mean and population (1/N) standard deviation."""
    values = np.asarray(values, dtype=float)
    if values.size < 2:
        raise DegenerateConstant(f"need at least 2 values, got {values.size}")
    mean = float(values.mean())
    std = float(values.std())  # numpy default ddof=0 is the population std
    if std == 0.0:
        raise DegenerateConstant("zero variance input")
    return mean, std


def standardize_apply(values, mean: float, std: float) -> np.ndarray:
    if std <= 0.0:
        raise ZeroStd(f"std must be > 0, got {std}")
    return (np.asarray(values, dtype=float) - mean) / std


def inverse_apply(z, mean: float, std: float) -> np.ndarray:
    if std <= 0.0:
        raise ZeroStd(f"std must be > 0, got {std}")
    return np.asarray(z, dtype=float) * std + mean


def _footprint_weights(n_in: int, n_out: int) -> np.ndarray:
    """Row-stochastic (n_out, n_in) matrix of fractional box-average weights.

    Output cell i covers source interval [i*n_in/n_out, (i+1)*n_in/n_out);
    the weight of source pixel j is its overlap with that interval divided
    by the interval length. Footprints tile the input, so the global mean
    is preserved.
    """
    ratio = n_in / n_out
    weights = np.zeros((n_out, n_in))
    for i in range(n_out):
        start = i * ratio
        stop = (i + 1) * ratio
        j0 = int(np.floor(start))
        j1 = int(np.ceil(stop))
        for j in range(j0, min(j1, n_in)):
            overlap = min(stop, j + 1) - max(start, j)
            if overlap > 0:
                weights[i, j] = overlap / ratio
    return weights


def downscale_image(img: ThermoImage, out_w: int, out_h: int) -> ThermoImage:
    """Area-average downscale; each output pixel is the mean of its footprint."""
    if not (1 <= out_w <= img.width_px and 1 <= out_h <= img.height_px):
        raise BadDims(
            f"output {out_w}x{out_h} must be within input {img.width_px}x{img.height_px}")
    src = img.as_array()
    w_rows = _footprint_weights(img.height_px, out_h)
    w_cols = _footprint_weights(img.width_px, out_w)
    out = w_rows @ src @ w_cols.T
    return ThermoImage(width_px=out_w, height_px=out_h, pixels=out.reshape(-1))
