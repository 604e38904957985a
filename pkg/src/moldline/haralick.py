"""Gray-level co-occurrence matrices and the 14 Haralick texture features.

Conventions, declared once: natural log everywhere, 0*log(0) := 0, and a
symmetric normalized GLCM (every pixel pair is counted in both directions).
The max correlation coefficient (mcc) is the square root of the
second-largest eigenvalue of the pair-interaction matrix; it is computed by
deflated power iteration on a symmetric similarity transform, with no
tridiagonalization and a 1e-10 convergence tolerance.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dataset import ThermoImage
from .errors import NoValidPairs

FEATURE_NAMES = (
    "energy", "contrast", "correlation", "variance", "idm",
    "sum_average", "sum_variance", "sum_entropy", "entropy",
    "difference_variance", "difference_entropy", "imc1", "imc2", "mcc",
)

MCC_TOL = 1e-10
MCC_MAX_ITER = 10_000


@dataclass(frozen=True)
class Glcm:
    levels: int
    counts: np.ndarray  # (levels, levels), symmetric, sums to 1


@dataclass(frozen=True)
class HaralickResult:
    features: dict
    flags: tuple = ()


def quantize(img, levels: int) -> np.ndarray:
    """Linear binning between per-image min and max into [0, levels).

    A constant image maps entirely to level 0. The top bin is right-closed
    so the maximum value lands in level levels-1, not levels.
    """
    if levels < 2:
        raise ValueError(f"levels must be >= 2, got {levels}")
    arr = img.as_array() if isinstance(img, ThermoImage) else np.asarray(img, dtype=float)
    lo = arr.min()
    hi = arr.max()
    if hi == lo:
        return np.zeros(arr.shape, dtype=np.intp)
    q = np.floor((arr - lo) / (hi - lo) * levels).astype(np.intp)
    return np.minimum(q, levels - 1)


def glcm(qimg: np.ndarray, offsets, levels: int) -> Glcm:
    """Symmetric normalized co-occurrence matrix over all given offsets."""
    qimg = np.asarray(qimg)
    h, w = qimg.shape
    counts = np.zeros((levels, levels))
    for dy, dx in offsets:
        y0, y1 = max(0, -dy), min(h, h - dy)
        x0, x1 = max(0, -dx), min(w, w - dx)
        if y0 >= y1 or x0 >= x1:
            continue
        a = qimg[y0:y1, x0:x1].ravel()
        b = qimg[y0 + dy:y1 + dy, x0 + dx:x1 + dx].ravel()
        np.add.at(counts, (a, b), 1.0)
        np.add.at(counts, (b, a), 1.0)
    total = counts.sum()
    if total == 0:
        raise NoValidPairs(f"no in-bounds pixel pairs for offsets {list(offsets)}")
    return Glcm(levels=levels, counts=counts / total)


def _entropy(p: np.ndarray) -> float:
    nz = p[p > 0]
    return float(-(nz * np.log(nz)).sum())


def _max_correlation_coefficient(p, px, py) -> tuple:
    """sqrt of the second-largest eigenvalue of Q(i,j) = sum_k p(i,k)p(j,k)/(px(i)py(k)).

    Q is similar to the symmetric PSD matrix S = M M^T with
    M(i,k) = p(i,k)/sqrt(px(i)py(k)), whose dominant eigenpair is known
    exactly (eigenvalue 1, eigenvector sqrt(px)). Deflating it and power
    iterating S gives the second eigenvalue directly.
    """
    keep = px > 0
    if keep.sum() < 2:
        return 0.0, ("degenerate_mcc",)
    pk = p[np.ix_(keep, keep)]
    pxk = px[keep]
    pyk = py[keep]
    m = pk / np.sqrt(np.outer(pxk, pyk))
    s = m @ m.T
    v1 = np.sqrt(pxk)
    v1 /= np.linalg.norm(v1)
    s = s - np.outer(v1, v1)  # deflate the known unit eigenvalue

    v = np.ones(s.shape[0])
    v[::2] = -1.0
    v -= v1 * (v1 @ v)
    norm = np.linalg.norm(v)
    if norm == 0:
        return 0.0, ("degenerate_mcc",)
    v /= norm
    lam = 0.0
    for _ in range(MCC_MAX_ITER):
        w = s @ v
        norm = np.linalg.norm(w)
        if norm < 1e-300:
            return 0.0, ()
        v = w / norm
        lam_new = float(v @ s @ v)
        if abs(lam_new - lam) < MCC_TOL:
            return math.sqrt(max(lam_new, 0.0)), ()
        lam = lam_new
    return math.sqrt(max(lam, 0.0)), ("mcc_not_converged",)


def haralick_features(g: Glcm) -> HaralickResult:
    """The 14 texture statistics of a normalized symmetric GLCM."""
    p = g.counts
    G = g.levels
    idx = np.arange(G)
    px = p.sum(axis=1)
    py = p.sum(axis=0)
    ii, jj = np.meshgrid(idx, idx, indexing="ij")

    p_sum = np.zeros(2 * G - 1)
    np.add.at(p_sum, (ii + jj).ravel(), p.ravel())
    p_diff = np.zeros(G)
    np.add.at(p_diff, np.abs(ii - jj).ravel(), p.ravel())
    k_sum = np.arange(2 * G - 1)
    k_diff = np.arange(G)

    flags = []
    mu_x = float(idx @ px)
    mu_y = float(idx @ py)
    var_x = float(((idx - mu_x) ** 2) @ px)
    var_y = float(((idx - mu_y) ** 2) @ py)

    if var_x > 0 and var_y > 0:
        correlation = (float((ii * jj * p).sum()) - mu_x * mu_y) / math.sqrt(var_x * var_y)
    else:
        correlation = 0.0
        flags.append("degenerate_correlation")

    sum_average = float(k_sum @ p_sum)
    hx = _entropy(px)
    hy = _entropy(py)
    hxy = _entropy(p)
    outer = np.outer(px, py)
    mask = p > 0
    hxy1 = float(-(p[mask] * np.log(outer[mask])).sum())
    nz = outer > 0
    hxy2 = float(-(outer[nz] * np.log(outer[nz])).sum())
    denom = max(hx, hy)
    if denom > 0:
        imc1 = (hxy - hxy1) / denom
    else:
        imc1 = 0.0
        flags.append("degenerate_imc1")
    imc2 = math.sqrt(max(0.0, 1.0 - math.exp(-2.0 * (hxy2 - hxy))))

    mu_d = float(k_diff @ p_diff)
    mcc, mcc_flags = _max_correlation_coefficient(p, px, py)
    flags.extend(mcc_flags)

    features = {
        "energy": float((p ** 2).sum()),
        "contrast": float((k_diff ** 2) @ p_diff),
        "correlation": correlation,
        "variance": var_x,
        "idm": float((p / (1.0 + (ii - jj) ** 2)).sum()),
        "sum_average": sum_average,
        "sum_variance": float(((k_sum - sum_average) ** 2) @ p_sum),
        "sum_entropy": _entropy(p_sum),
        "entropy": hxy,
        "difference_variance": float(((k_diff - mu_d) ** 2) @ p_diff),
        "difference_entropy": _entropy(p_diff),
        "imc1": imc1,
        "imc2": imc2,
        "mcc": mcc,
    }
    return HaralickResult(features=features, flags=tuple(flags))


def averaged_haralick(qimg: np.ndarray, offsets, levels: int) -> HaralickResult:
    """Per-offset features, averaged. Invariant to 90-degree image rotation
    for the standard 4-direction offset set."""
    totals = dict.fromkeys(FEATURE_NAMES, 0.0)
    flags = []
    for offset in offsets:
        result = haralick_features(glcm(qimg, [offset], levels))
        for name in FEATURE_NAMES:
            totals[name] += result.features[name]
        flags.extend(result.flags)
    n = len(tuple(offsets))
    return HaralickResult(
        features={name: totals[name] / n for name in FEATURE_NAMES},
        flags=tuple(sorted(set(flags))),
    )
