"""Correlation analysis and recursive feature elimination.

RFE repeatedly drops the feature whose standardized OLS coefficient is
smallest in magnitude, scoring each cardinality by k-fold cross-validated
R^2 of a plain linear fit. The score curve therefore has exactly one entry
per cardinality from n_features down to 1.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .descriptors import FeatureMatrix
from .regress import solve_ols, scores

SCORE_TIE_TOL = 1e-12


def correlation_matrix(fm) -> tuple:
    """Pearson correlation matrix; (matrix, constant-column flags).

    Constant columns correlate 0 with everything (diagonal stays 1) and are
    flagged rather than propagating NaNs.
    """
    X = fm.values if isinstance(fm, FeatureMatrix) else np.asarray(fm, dtype=float)
    if X.shape[0] < 2:
        raise ValueError("need at least 2 rows")
    centered = X - X.mean(axis=0)
    norms = np.sqrt((centered ** 2).sum(axis=0))
    constant = norms == 0
    safe = np.where(constant, 1.0, norms)
    unit = centered / safe
    corr = unit.T @ unit
    corr[constant, :] = 0.0
    corr[:, constant] = 0.0
    np.fill_diagonal(corr, 1.0)
    corr = np.clip(corr, -1.0, 1.0)
    return corr, constant


def count_correlated(corr: np.ndarray, threshold: float = 0.95) -> int:
    """Features whose |r| reaches the threshold with at least one other feature."""
    a = np.abs(np.asarray(corr, dtype=float))
    np.fill_diagonal(a, 0.0)
    return int(((a >= threshold).any(axis=1)).sum())


@dataclass
class RfeResult:
    selected: list            # names of the best subset
    selected_indices: list
    curve: list               # [(cardinality, mean_r2, std_r2)] descending cardinality
    elimination_order: list   # names in the order they were dropped
    flags: tuple = ()


def _standardized_coefs(X, y):
    sigma = X.std(axis=0)
    coef, _intercept, flags = solve_ols(X, y)
    return coef * sigma, flags


def _cv_r2(X, y, folds) -> tuple:
    r2s = []
    for train_idx, test_idx in folds:
        coef, intercept, _ = solve_ols(X[train_idx], y[train_idx])
        pred = X[test_idx] @ coef + intercept
        _, r2 = scores(y[test_idx], pred)
        r2s.append(r2)
    r2s = np.array(r2s)
    return float(r2s.mean()), float(r2s.std())


def make_folds(n: int, k: int, seed: int) -> list:
    """Seeded shuffled k-fold assignment as (train_idx, test_idx) pairs."""
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    parts = np.array_split(order, k)
    folds = []
    for i, part in enumerate(parts):
        rest = np.concatenate([parts[j] for j in range(k) if j != i])
        folds.append((np.sort(rest), np.sort(part)))
    return folds


def rfe(fm, targets, cv_folds: int = 5, seed: int = 0) -> RfeResult:
    """Recursive feature elimination scored by linear-regression CV R^2.

    Returns the subset attaining the maximum mean CV R^2; score ties within
    1e-12 go to the smaller subset. Elimination ties on |standardized
    coefficient| go to the lexicographically first name.
    """
    if isinstance(fm, FeatureMatrix):
        X_all = fm.values
        names = fm.manifest.names
    else:
        X_all = np.asarray(fm, dtype=float)
        names = [f"f{i}" for i in range(X_all.shape[1])]
    y = np.asarray(targets, dtype=float)
    n = y.size
    if n < cv_folds + 1:
        raise ValueError(f"need at least cv_folds + 1 = {cv_folds + 1} rows, got {n}")
    folds = make_folds(n, cv_folds, seed)

    remaining = list(range(X_all.shape[1]))
    curve = []
    snapshots = []
    eliminated = []
    flags = set()
    while remaining:
        X = X_all[:, remaining]
        mean_r2, std_r2 = _cv_r2(X, y, folds)
        curve.append((len(remaining), mean_r2, std_r2))
        snapshots.append(list(remaining))
        if len(remaining) == 1:
            break
        coefs, fit_flags = _standardized_coefs(X, y)
        flags.update(fit_flags)
        order = sorted(range(len(remaining)),
                       key=lambda j: (abs(coefs[j]), names[remaining[j]]))
        victim = remaining[order[0]]
        eliminated.append(names[victim])
        remaining.remove(victim)

    best_mean = max(entry[1] for entry in curve)
    best_pos = max(i for i, entry in enumerate(curve)
                   if entry[1] >= best_mean - SCORE_TIE_TOL)  # later = smaller subset
    best_indices = snapshots[best_pos]
    return RfeResult(
        selected=[names[i] for i in best_indices],
        selected_indices=best_indices,
        curve=curve,
        elimination_order=eliminated,
        flags=tuple(sorted(flags)),
    )


def export_rfe_curve(result: RfeResult, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["cardinality", "mean_r2", "std_r2"])
        for cardinality, mean_r2, std_r2 in result.curve:
            writer.writerow([cardinality, repr(mean_r2), repr(std_r2)])


def export_correlation(corr: np.ndarray, names, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["feature"] + list(names))
        for name, row in zip(names, corr):
            writer.writerow([name] + [repr(float(v)) for v in row])
