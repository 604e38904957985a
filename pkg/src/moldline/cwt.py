"""Continuous wavelet transform and ridge-line peak detection.

Peaks are located by transforming the signal with Mexican-hat wavelets over
a range of scales, chaining per-scale local maxima into ridge lines, and
keeping ridges that are long enough and stand out from their local
surroundings. Direct convolution is used throughout; at 3000 samples and
scales up to 32 an FFT path buys nothing.
"""
from __future__ import annotations

import bisect
import math
from dataclasses import dataclass

import numpy as np

from .config import CwtConfig
from .errors import BadWidth, SignalTooShort


@dataclass(frozen=True)
class CwtMatrix:
    coefficients: np.ndarray  # (n_scales, n_samples)
    scales: tuple


@dataclass(frozen=True)
class Peak:
    index: int     # sample position
    scale: float   # best-responding width
    snr: float
    height: float  # signal value at index


def ricker(points: int, width: float) -> np.ndarray:
    """Mexican-hat wavelet sampled symmetrically about zero.

    psi(t) = 2 / (sqrt(3 w) pi^(1/4)) * (1 - t^2/w^2) * exp(-t^2 / (2 w^2))
    """
    if width <= 0:
        raise BadWidth(f"width must be > 0, got {width}")
    if points < 3 or points % 2 == 0:
        raise ValueError(f"points must be odd and >= 3, got {points}")
    amp = 2.0 / (math.sqrt(3.0 * width) * math.pi ** 0.25)
    t = np.arange(points) - (points - 1) / 2.0
    tsq = (t / width) ** 2
    return amp * (1.0 - tsq) * np.exp(-tsq / 2.0)


def _wavelet_points(scale: float, n: int) -> int:
    """Support of 10*scale samples, clipped to the signal and forced odd."""
    points = min(int(10 * scale), n)
    if points % 2 == 0:
        points -= 1
    return max(points, 3)


def cwt_transform(signal, scales) -> CwtMatrix:
    """One same-length zero-padded convolution row per scale."""
    signal = np.asarray(signal, dtype=float)
    scales = tuple(float(s) for s in scales)
    n = signal.size
    if n < 3:
        raise SignalTooShort(f"signal of {n} samples is shorter than any wavelet support")
    rows = np.empty((len(scales), n))
    for i, scale in enumerate(scales):
        wavelet = ricker(_wavelet_points(scale, n), scale)
        rows[i] = np.convolve(signal, wavelet, mode="same")
    return CwtMatrix(coefficients=rows, scales=scales)


def _row_local_maxima(row: np.ndarray) -> np.ndarray:
    """Indices strictly greater than both neighbours (edges excluded)."""
    interior = (row[1:-1] > row[:-2]) & (row[1:-1] > row[2:])
    return np.nonzero(interior)[0] + 1


def _link_ridges(matrix: np.ndarray, scales, gap_threshold: int) -> list:
    """Greedy ridge linking from the largest scale down to the smallest.

    Each row's maxima try to join the nearest open ridge whose last column
    is within max(1, scale/4); distance ties go to the ridge with the
    smaller column. A ridge that misses more than gap_threshold consecutive
    rows is closed. Returns [(rows, cols)] with rows ascending.
    """
    n_rows = matrix.shape[0]
    maxima = [_row_local_maxima(matrix[r]) for r in range(n_rows)]
    open_ridges = []   # [rows, cols, gap]
    closed = []
    for row in range(n_rows - 1, -1, -1):
        for ridge in open_ridges:
            ridge[2] += 1
        max_dist = max(1.0, scales[row] / 4.0)
        # ridges sorted by last column so each maximum only probes its
        # nearest neighbours; ties in distance go to the smaller column
        order = sorted(range(len(open_ridges)), key=lambda k: open_ridges[k][1][-1])
        sorted_cols = [open_ridges[k][1][-1] for k in order]
        claimed = [False] * len(open_ridges)
        new_ridges = []
        for col in maxima[row]:
            col = int(col)
            pos = bisect.bisect_left(sorted_cols, col)
            best = None
            best_key = None
            li = pos - 1
            while li >= 0 and col - sorted_cols[li] <= max_dist:
                k = order[li]
                if not claimed[k]:
                    best, best_key = k, (col - sorted_cols[li], sorted_cols[li])
                    break
                li -= 1
            ri = pos
            while ri < len(order) and sorted_cols[ri] - col <= max_dist:
                if best_key is not None and sorted_cols[ri] - col > best_key[0]:
                    break
                k = order[ri]
                if not claimed[k]:
                    key = (sorted_cols[ri] - col, sorted_cols[ri])
                    if best_key is None or key < best_key:
                        best, best_key = k, key
                    break
                ri += 1
            if best is None:
                new_ridges.append([[row], [col], 0])
            else:
                open_ridges[best][0].append(row)
                open_ridges[best][1].append(col)
                open_ridges[best][2] = 0
                claimed[best] = True
        open_ridges.extend(new_ridges)
        still_open = []
        for ridge in open_ridges:
            if ridge[2] > gap_threshold:
                closed.append(ridge)
            else:
                still_open.append(ridge)
        open_ridges = still_open
    lines = []
    for rows, cols, _gap in closed + open_ridges:
        order = np.argsort(rows)
        lines.append((np.asarray(rows)[order], np.asarray(cols)[order]))
    return lines


def find_peaks_cwt(signal, scales=None, min_ridge_length=None, min_snr=None,
                   config: CwtConfig | None = None) -> list:
    """Ridge-line peak detection; returns Peak list sorted by index.

    A ridge is kept when it spans at least min_ridge_length scales and its
    snr is at least min_snr. snr is the absolute coefficient at the ridge's
    smallest scale divided by the larger of (a) the 95th percentile of
    absolute smallest-scale coefficients in a local window and (b) a floor
    of snr_floor_frac times the global max |coefficient|. The floor is what
    ties detection to relative response strength: pure-noise ridges score
    snr near 1 against their own neighbourhood at any amplitude, but fall
    far below the floor whenever a real structure dominates the transform.
    Both numerator and denominator scale linearly with the signal, so peak
    decisions are invariant to positive amplitude scaling. Peaks closer
    than max(scales) to either edge are discarded as convolution artifacts.
    """
    config = config or CwtConfig()
    scales = tuple(config.scales if scales is None else scales)
    if min_ridge_length is None:
        min_ridge_length = config.min_ridge_length
    if min_ridge_length is None:
        min_ridge_length = math.ceil(len(scales) / 4)
    if min_snr is None:
        min_snr = config.min_snr
    if any(b <= a for a, b in zip(scales, scales[1:])):
        raise ValueError("scales must be strictly ascending")

    signal = np.asarray(signal, dtype=float)
    matrix = cwt_transform(signal, scales)
    lines = _link_ridges(matrix.coefficients, scales, config.gap_threshold)

    n = signal.size
    window = config.window_size or math.ceil(n / 20)
    half = window // 2
    abs_row0 = np.abs(matrix.coefficients[0])
    global_floor = config.snr_floor_frac * float(np.abs(matrix.coefficients).max())
    edge = int(max(scales))

    peaks = []
    for rows, cols in lines:
        if len(rows) < min_ridge_length:
            continue
        r0, c0 = int(rows[0]), int(cols[0])
        lo = max(c0 - half, 0)
        hi = min(c0 + half + window % 2, n)
        denom = max(float(np.percentile(abs_row0[lo:hi], 95)), global_floor)
        numer = abs(float(matrix.coefficients[r0, c0]))
        snr = numer / denom if denom > 0 else 0.0
        if snr < min_snr:
            continue
        if c0 < edge or c0 >= n - edge:
            continue
        ridge_values = np.abs(matrix.coefficients[rows, cols])
        best_scale = scales[int(rows[np.argmax(ridge_values)])]
        peaks.append(Peak(index=c0, scale=float(best_scale), snr=snr,
                          height=float(signal[c0])))
    peaks.sort(key=lambda p: p.index)
    return peaks
