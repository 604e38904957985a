"""The classical regressor suite under one uniform fit/predict contract.

Every model is deterministic given (data, hyperparameters, seed), carries a
kind tag, and serializes its fitted state to versioned JSON. Implementations
are plain numpy; nothing here calls into an external learning library.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import BadModelKind, NotFitted, SingularDesign

FORMAT_VERSION = 1


# -- shared linear algebra ----------------------------------------------------

def solve_ols(X, y) -> tuple:
    """Least squares by normal equations; (coef, intercept, flags).

    Exactly singular designs fall back to a ridge-stabilized solve with
    lambda = 1e-8 and are flagged; SingularDesign is raised only when the
    fallback fails too.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    A = np.column_stack([np.ones(X.shape[0]), X])
    G = A.T @ A
    b = A.T @ y
    flags = []
    sv = np.linalg.svd(G, compute_uv=False)
    if sv[-1] > sv[0] * 1e-12:
        w = np.linalg.solve(G, b)
    else:
        flags.append("ridge_stabilized")
        try:
            w = np.linalg.solve(G + 1e-8 * np.eye(G.shape[0]), b)
        except np.linalg.LinAlgError as exc:
            raise SingularDesign(str(exc)) from exc
    if not np.all(np.isfinite(w)):
        raise SingularDesign("non-finite solution")
    return w[1:], float(w[0]), flags


def scores(y_true, y_pred) -> tuple:
    """(MSE, R^2); R^2 uses the total sum of squares about the true mean."""
    y_true = np.asarray(y_true, dtype=float)
    y_pred = np.asarray(y_pred, dtype=float)
    residuals = y_true - y_pred
    mse = float((residuals ** 2).mean())
    ss_tot = float(((y_true - y_true.mean()) ** 2).sum())
    if ss_tot == 0.0:
        return mse, 0.0
    return mse, 1.0 - float((residuals ** 2).sum()) / ss_tot


def evaluate(model, X_test, y_test) -> tuple:
    return scores(y_test, model.predict(X_test))


def soft_threshold(z: float, threshold: float) -> float:
    if z > threshold:
        return z - threshold
    if z < -threshold:
        return z + threshold
    return 0.0


def weighted_median(values, weights) -> float:
    """Smallest value whose cumulative weight reaches half the total."""
    values = np.asarray(values, dtype=float)
    weights = np.asarray(weights, dtype=float)
    order = np.argsort(values, kind="stable")
    cum = np.cumsum(weights[order])
    pivot = np.searchsorted(cum, 0.5 * cum[-1])
    return float(values[order][min(pivot, values.size - 1)])


# -- base contract --------------------------------------------------------------

class Regressor:
    kind = "base"

    def __init__(self, seed: int = 0):
        self.seed = seed
        self.fitted = False
        self.flags = []

    def fit(self, X, y):
        raise NotImplementedError

    def predict(self, X):
        raise NotImplementedError

    def _require_fitted(self):
        if not self.fitted:
            raise NotFitted(f"{self.kind}: predict called before fit")

    def hyperparams(self) -> dict:
        return {}

    def get_state(self) -> dict:
        raise NotImplementedError

    def set_state(self, state: dict) -> None:
        raise NotImplementedError


class OlsRegressor(Regressor):
    kind = "ols"

    def fit(self, X, y):
        self.coef_, self.intercept_, self.flags = solve_ols(X, y)
        self.fitted = True
        return self

    def predict(self, X):
        self._require_fitted()
        return np.asarray(X, dtype=float) @ self.coef_ + self.intercept_

    def get_state(self):
        return {"coef": self.coef_.tolist(), "intercept": self.intercept_,
                "flags": list(self.flags)}

    def set_state(self, state):
        self.coef_ = np.array(state["coef"], dtype=float)
        self.intercept_ = float(state["intercept"])
        self.flags = list(state["flags"])
        self.fitted = True


class CoordinateDescentRegressor(Regressor):
    """Elastic net by cyclic coordinate descent with soft-thresholding.

    Objective: (1/2N) ||y - Xb||^2 + l1 ||b||_1 + (l2/2) ||b||^2, solved on
    internally standardized columns and centered targets.
    """

    kind = "elastic_net"

    def __init__(self, l1: float = 0.0, l2: float = 0.0, tol: float = 1e-8,
                 max_iter: int = 1000, seed: int = 0, kind: str | None = None):
        super().__init__(seed)
        if kind is not None:
            self.kind = kind
        self.l1 = l1
        self.l2 = l2
        self.tol = tol
        self.max_iter = max_iter

    def hyperparams(self):
        return {"l1": self.l1, "l2": self.l2, "tol": self.tol, "max_iter": self.max_iter}

    def fit(self, X, y):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        n, p = X.shape
        self.mu_ = X.mean(axis=0)
        sigma = X.std(axis=0)
        self.sigma_ = np.where(sigma > 0, sigma, 1.0)
        self.y_mean_ = float(y.mean())
        Xs = (X - self.mu_) / self.sigma_
        yc = y - self.y_mean_
        col_sq = (Xs ** 2).mean(axis=0)  # 1 for live columns, 0 for constants

        beta = np.zeros(p)
        r = yc.copy()
        self.converged_ = False
        for _ in range(self.max_iter):
            max_delta = 0.0
            for j in range(p):
                old = beta[j]
                z = (Xs[:, j] @ r) / n + old * col_sq[j]
                denom = col_sq[j] + self.l2
                new = soft_threshold(z, self.l1) / denom if denom > 0 else 0.0
                if new != old:
                    r -= Xs[:, j] * (new - old)
                    beta[j] = new
                    max_delta = max(max_delta, abs(new - old))
            if max_delta < self.tol:
                self.converged_ = True
                break
        if not self.converged_:
            self.flags.append("not_converged")
        self.beta_ = beta
        self.fitted = True
        return self

    def objective(self, X, y) -> float:
        X = np.asarray(X, dtype=float)
        Xs = (X - self.mu_) / self.sigma_
        r = (y - self.y_mean_) - Xs @ self.beta_
        return float((r ** 2).mean() / 2 + self.l1 * np.abs(self.beta_).sum()
                     + self.l2 / 2 * (self.beta_ ** 2).sum())

    def predict(self, X):
        self._require_fitted()
        Xs = (np.asarray(X, dtype=float) - self.mu_) / self.sigma_
        return Xs @ self.beta_ + self.y_mean_

    def get_state(self):
        return {"beta": self.beta_.tolist(), "mu": self.mu_.tolist(),
                "sigma": self.sigma_.tolist(), "y_mean": self.y_mean_,
                "converged": self.converged_, "flags": list(self.flags)}

    def set_state(self, state):
        self.beta_ = np.array(state["beta"], dtype=float)
        self.mu_ = np.array(state["mu"], dtype=float)
        self.sigma_ = np.array(state["sigma"], dtype=float)
        self.y_mean_ = float(state["y_mean"])
        self.converged_ = bool(state["converged"])
        self.flags = list(state["flags"])
        self.fitted = True


class LassoRegressor(CoordinateDescentRegressor):
    kind = "lasso"

    def __init__(self, l1: float = 0.0, tol: float = 1e-8, max_iter: int = 1000,
                 seed: int = 0):
        super().__init__(l1=l1, l2=0.0, tol=tol, max_iter=max_iter, seed=seed)
        self.kind = "lasso"

    def hyperparams(self):
        return {"l1": self.l1, "tol": self.tol, "max_iter": self.max_iter}


class LinearSvrRegressor(Regressor):
    """Primal epsilon-insensitive linear SVR by seeded per-sample subgradient
    descent with step 1/(lambda t), lambda = 1/(C N). Targets are centered
    internally so the epsilon tube starts near the data."""

    kind = "svr"

    def __init__(self, C: float = 1.0, epsilon: float = 0.1, epochs: int = 10_000,
                 seed: int = 0):
        super().__init__(seed)
        self.C = C
        self.epsilon = epsilon
        self.epochs = epochs

    def hyperparams(self):
        return {"C": self.C, "epsilon": self.epsilon, "epochs": self.epochs}

    def fit(self, X, y):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        n, p = X.shape
        self.y_mean_ = float(y.mean())
        yc = y - self.y_mean_
        w = np.zeros(p)
        b = 0.0
        if self.C > 0:
            lam = 1.0 / (self.C * n)
            rng = np.random.default_rng(self.seed)
            t = 0
            for _ in range(self.epochs):
                for i in rng.permutation(n):
                    t += 1
                    eta = 1.0 / (lam * t)
                    e = w @ X[i] + b - yc[i]
                    w *= 1.0 - eta * lam
                    if abs(e) > self.epsilon:
                        g = 1.0 if e > 0 else -1.0
                        w -= eta * g * X[i]
                        b -= eta * g
        self.coef_ = w
        self.intercept_ = b + self.y_mean_
        self.fitted = True
        return self

    def predict(self, X):
        self._require_fitted()
        return np.asarray(X, dtype=float) @ self.coef_ + self.intercept_

    def get_state(self):
        return {"coef": self.coef_.tolist(), "intercept": self.intercept_,
                "y_mean": self.y_mean_, "flags": list(self.flags)}

    def set_state(self, state):
        self.coef_ = np.array(state["coef"], dtype=float)
        self.intercept_ = float(state["intercept"])
        self.y_mean_ = float(state["y_mean"])
        self.flags = list(state["flags"])
        self.fitted = True


class KnnRegressor(Regressor):
    """k nearest neighbours under the L1 (Minkowski p=1) metric, unweighted
    mean of the k targets. Exact brute-force search; distance ties resolve
    to the lower training index via a stable sort."""

    kind = "knn"

    def __init__(self, k: int = 2, seed: int = 0):
        super().__init__(seed)
        self.k = k

    def hyperparams(self):
        return {"k": self.k}

    def fit(self, X, y):
        self.X_ = np.asarray(X, dtype=float).copy()
        self.y_ = np.asarray(y, dtype=float).copy()
        if not 1 <= self.k <= self.y_.size:
            raise ValueError(f"k={self.k} outside [1, {self.y_.size}]")
        self.fitted = True
        return self

    def predict(self, X):
        self._require_fitted()
        X = np.atleast_2d(np.asarray(X, dtype=float))
        out = np.empty(X.shape[0])
        for i, q in enumerate(X):
            dist = np.abs(self.X_ - q).sum(axis=1)
            nearest = np.argsort(dist, kind="stable")[: self.k]
            out[i] = self.y_[nearest].mean()
        return out

    def get_state(self):
        return {"X": self.X_.tolist(), "y": self.y_.tolist(), "flags": list(self.flags)}

    def set_state(self, state):
        self.X_ = np.array(state["X"], dtype=float)
        self.y_ = np.array(state["y"], dtype=float)
        self.flags = list(state["flags"])
        self.fitted = True


class SgdLinearRegressor(Regressor):
    """Per-sample SGD on squared loss with an explicit l1 + l2 penalty and
    learning rate lr0 / t^power over the cumulative update count."""

    kind = "sgd"

    def __init__(self, l1: float = 0.0001, l2: float = 0.00067, epochs: int = 5,
                 lr0: float = 0.01, lr_power: float = 0.25, seed: int = 0):
        super().__init__(seed)
        self.l1 = l1
        self.l2 = l2
        self.epochs = epochs
        self.lr0 = lr0
        self.lr_power = lr_power

    def hyperparams(self):
        return {"l1": self.l1, "l2": self.l2, "epochs": self.epochs,
                "lr0": self.lr0, "lr_power": self.lr_power}

    def fit(self, X, y):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        n, p = X.shape
        rng = np.random.default_rng(self.seed)
        w = np.zeros(p)
        b = 0.0
        t = 0
        self.epoch_coefs_ = []
        for _ in range(self.epochs):
            for i in rng.permutation(n):
                t += 1
                eta = self.lr0 / t ** self.lr_power
                e = w @ X[i] + b - y[i]
                w -= eta * (e * X[i] + self.l1 * np.sign(w) + self.l2 * w)
                b -= eta * e
            self.epoch_coefs_.append(w.copy())
        self.coef_ = w
        self.intercept_ = b
        self.fitted = True
        return self

    def predict(self, X):
        self._require_fitted()
        return np.asarray(X, dtype=float) @ self.coef_ + self.intercept_

    def get_state(self):
        return {"coef": self.coef_.tolist(), "intercept": self.intercept_,
                "flags": list(self.flags)}

    def set_state(self, state):
        self.coef_ = np.array(state["coef"], dtype=float)
        self.intercept_ = float(state["intercept"])
        self.flags = list(state["flags"])
        self.fitted = True


# -- trees and ensembles -------------------------------------------------------

@dataclass
class TreeNode:
    value: float = 0.0
    feature: int = -1
    threshold: float = 0.0
    left: "TreeNode" = None
    right: "TreeNode" = None

    @property
    def is_leaf(self) -> bool:
        return self.feature < 0

    def to_dict(self) -> dict:
        if self.is_leaf:
            return {"value": self.value}
        return {"feature": self.feature, "threshold": self.threshold,
                "left": self.left.to_dict(), "right": self.right.to_dict()}

    @classmethod
    def from_dict(cls, d: dict) -> "TreeNode":
        if "feature" not in d:
            return cls(value=float(d["value"]))
        return cls(feature=int(d["feature"]), threshold=float(d["threshold"]),
                   left=cls.from_dict(d["left"]), right=cls.from_dict(d["right"]))


def _best_split(X, y, indices, candidate_features):
    """Split minimizing total child squared error; ties keep the first
    candidate in (feature, ascending threshold) order. None when no split
    improves on the parent."""
    y_node = y[indices]
    n = y_node.size
    parent_sse = float(((y_node - y_node.mean()) ** 2).sum())
    best = None
    best_sse = parent_sse
    for j in candidate_features:
        x = X[indices, j]
        order = np.argsort(x, kind="stable")
        xs = x[order]
        ys = y_node[order]
        csum = np.cumsum(ys)
        csq = np.cumsum(ys ** 2)
        total, total_sq = csum[-1], csq[-1]
        for i in range(n - 1):
            if xs[i] == xs[i + 1]:
                continue
            nl = i + 1
            nr = n - nl
            sse = (csq[i] - csum[i] ** 2 / nl) + \
                  (total_sq - csq[i] - (total - csum[i]) ** 2 / nr)
            if sse < best_sse - 1e-12 * max(1.0, parent_sse):
                best_sse = sse
                best = (j, float((xs[i] + xs[i + 1]) / 2.0))
    return best


class DecisionTree:
    """Greedy binary regression tree, squared-error split criterion,
    midpoint thresholds, mean-valued leaves."""

    def __init__(self, max_depth=None, min_samples_split: int = 2,
                 max_features=None):
        self.max_depth = max_depth
        self.min_samples_split = min_samples_split
        self.max_features = max_features
        self.root = None

    def fit(self, X, y, rng=None):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        self.n_features_ = X.shape[1]
        self.root = self._build(X, y, np.arange(y.size), 0, rng)
        return self

    def _build(self, X, y, indices, depth, rng):
        y_node = y[indices]
        if (self.max_depth is not None and depth >= self.max_depth) \
                or indices.size < self.min_samples_split \
                or np.all(y_node == y_node[0]):
            return TreeNode(value=float(y_node.mean()))
        if self.max_features is not None and self.max_features < self.n_features_:
            candidates = np.sort(rng.choice(self.n_features_, self.max_features,
                                            replace=False))
        else:
            candidates = range(self.n_features_)
        split = _best_split(X, y, indices, candidates)
        if split is None:
            return TreeNode(value=float(y_node.mean()))
        j, threshold = split
        go_left = X[indices, j] <= threshold
        node = TreeNode(feature=j, threshold=threshold)
        node.left = self._build(X, y, indices[go_left], depth + 1, rng)
        node.right = self._build(X, y, indices[~go_left], depth + 1, rng)
        return node

    def leaf_for(self, x) -> TreeNode:
        node = self.root
        while not node.is_leaf:
            node = node.left if x[node.feature] <= node.threshold else node.right
        return node

    def predict(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return np.array([self.leaf_for(x).value for x in X])


class DecisionTreeRegressor(Regressor):
    kind = "tree"

    def __init__(self, max_depth=1, min_samples_split: int = 2, seed: int = 0):
        super().__init__(seed)
        self.max_depth = max_depth
        self.min_samples_split = min_samples_split

    def hyperparams(self):
        return {"max_depth": self.max_depth, "min_samples_split": self.min_samples_split}

    def fit(self, X, y):
        self.tree_ = DecisionTree(self.max_depth, self.min_samples_split).fit(X, y)
        self.fitted = True
        return self

    def predict(self, X):
        self._require_fitted()
        return self.tree_.predict(X)

    def get_state(self):
        return {"tree": self.tree_.root.to_dict(),
                "n_features": self.tree_.n_features_, "flags": list(self.flags)}

    def set_state(self, state):
        self.tree_ = DecisionTree(self.max_depth, self.min_samples_split)
        self.tree_.root = TreeNode.from_dict(state["tree"])
        self.tree_.n_features_ = int(state["n_features"])
        self.flags = list(state["flags"])
        self.fitted = True


class BaggingRegressor(Regressor):
    """Bootstrap-aggregated trees; prediction is the unweighted member mean."""

    kind = "bagging"

    def __init__(self, n_estimators: int = 10, max_depth=None,
                 min_samples_split: int = 2, seed: int = 0):
        super().__init__(seed)
        self.n_estimators = n_estimators
        self.max_depth = max_depth
        self.min_samples_split = min_samples_split

    def hyperparams(self):
        return {"n_estimators": self.n_estimators, "max_depth": self.max_depth,
                "min_samples_split": self.min_samples_split}

    def _max_features(self, p):
        return None

    def fit(self, X, y):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        n, p = X.shape
        seeds = np.random.SeedSequence(self.seed).spawn(self.n_estimators)
        self.trees_ = []
        for ss in seeds:
            rng = np.random.default_rng(ss)
            idx = rng.integers(0, n, n)
            tree = DecisionTree(self.max_depth, self.min_samples_split,
                                max_features=self._max_features(p))
            tree.fit(X[idx], y[idx], rng=rng)
            self.trees_.append(tree)
        self.fitted = True
        return self

    def predict(self, X):
        self._require_fitted()
        preds = np.stack([t.predict(X) for t in self.trees_])
        return preds.mean(axis=0)

    def get_state(self):
        return {"trees": [t.root.to_dict() for t in self.trees_],
                "n_features": self.trees_[0].n_features_, "flags": list(self.flags)}

    def set_state(self, state):
        self.trees_ = []
        for d in state["trees"]:
            tree = DecisionTree(self.max_depth, self.min_samples_split)
            tree.root = TreeNode.from_dict(d)
            tree.n_features_ = int(state["n_features"])
            self.trees_.append(tree)
        self.flags = list(state["flags"])
        self.fitted = True


class RandomForestRegressor(BaggingRegressor):
    """Bagging plus per-split uniform feature subsampling."""

    kind = "random_forest"

    def __init__(self, n_trees: int = 100, max_features=None, max_depth=None,
                 min_samples_split: int = 2, seed: int = 0):
        super().__init__(n_estimators=n_trees, max_depth=max_depth,
                         min_samples_split=min_samples_split, seed=seed)
        self.n_trees = n_trees
        self.max_features = max_features
        if max_features is None:
            self.flags.append("max_features_all")

    def hyperparams(self):
        return {"n_trees": self.n_trees, "max_features": self.max_features,
                "max_depth": self.max_depth,
                "min_samples_split": self.min_samples_split}

    def _max_features(self, p):
        return self.max_features


class GbmLadRegressor(Regressor):
    """Gradient boosting with least-absolute-deviation loss.

    The model starts at the target median, each stage fits a tree to the
    sign of the residuals and replaces every leaf value with the median of
    the residuals it covers, and the stage is added with shrinkage nu.
    """

    kind = "gbm"

    def __init__(self, n_stages: int = 500, max_depth: int = 4,
                 min_samples_split: int = 2, learning_rate: float = 0.1,
                 seed: int = 0):
        super().__init__(seed)
        self.n_stages = n_stages
        self.max_depth = max_depth
        self.min_samples_split = min_samples_split
        self.learning_rate = learning_rate

    def hyperparams(self):
        return {"n_stages": self.n_stages, "max_depth": self.max_depth,
                "min_samples_split": self.min_samples_split,
                "learning_rate": self.learning_rate}

    def fit(self, X, y):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        self.f0_ = float(np.median(y))
        current = np.full(y.size, self.f0_)
        self.trees_ = []
        self.train_losses_ = [float(np.abs(y - current).mean())]
        for _ in range(self.n_stages):
            residual = y - current
            tree = DecisionTree(self.max_depth, self.min_samples_split)
            tree.fit(X, np.sign(residual))
            groups = {}
            for i, x in enumerate(X):
                leaf = tree.leaf_for(x)
                groups.setdefault(id(leaf), (leaf, []))[1].append(i)
            for leaf, members in groups.values():
                leaf.value = float(np.median(residual[members]))
            current = current + self.learning_rate * tree.predict(X)
            self.trees_.append(tree)
            self.train_losses_.append(float(np.abs(y - current).mean()))
        self.n_features_ = X.shape[1]
        self.fitted = True
        return self

    def predict(self, X):
        self._require_fitted()
        X = np.atleast_2d(np.asarray(X, dtype=float))
        out = np.full(X.shape[0], self.f0_)
        for tree in self.trees_:
            out += self.learning_rate * tree.predict(X)
        return out

    def get_state(self):
        return {"f0": self.f0_, "trees": [t.root.to_dict() for t in self.trees_],
                "train_losses": self.train_losses_, "n_features": self.n_features_,
                "flags": list(self.flags)}

    def set_state(self, state):
        self.f0_ = float(state["f0"])
        self.trees_ = []
        for d in state["trees"]:
            tree = DecisionTree(self.max_depth, self.min_samples_split)
            tree.root = TreeNode.from_dict(d)
            tree.n_features_ = int(state["n_features"])
            self.trees_.append(tree)
        self.train_losses_ = list(state["train_losses"])
        self.n_features_ = int(state["n_features"])
        self.flags = list(state["flags"])
        self.fitted = True


class AdaboostR2Regressor(Regressor):
    """Drucker's AdaBoost.R2 with linear loss and weighted-median prediction.

    Per round: draw a weighted bootstrap sample, fit a tree, compute linear
    losses L_i = |e_i| / max|e|, average loss Lbar and beta = Lbar/(1-Lbar),
    then downweight easy samples by beta^(1-L_i). Rounds with Lbar >= 0.5
    are discarded and boosting stops.
    """

    kind = "adaboost"

    def __init__(self, n_estimators: int = 300, learning_rate: float = 1.0,
                 base_max_depth: int = 3, seed: int = 0):
        super().__init__(seed)
        self.n_estimators = n_estimators
        self.learning_rate = learning_rate
        self.base_max_depth = base_max_depth

    def hyperparams(self):
        return {"n_estimators": self.n_estimators, "learning_rate": self.learning_rate,
                "base_max_depth": self.base_max_depth}

    def fit(self, X, y):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        n = y.size
        rng = np.random.default_rng(self.seed)
        w = np.full(n, 1.0 / n)
        self.trees_ = []
        self.log_weights_ = []
        self.avg_losses_ = []
        self.fallback_value_ = float(np.median(y))
        for _ in range(self.n_estimators):
            p = w / w.sum()
            idx = rng.choice(n, size=n, replace=True, p=p)
            tree = DecisionTree(self.base_max_depth, 2).fit(X[idx], y[idx])
            errors = np.abs(y - tree.predict(X))
            max_err = errors.max()
            if max_err == 0.0:
                self.trees_.append(tree)
                self.log_weights_.append(float(np.log(1e12)))
                self.avg_losses_.append(0.0)
                break
            losses = errors / max_err
            avg_loss = float(p @ losses)
            if avg_loss >= 0.5:
                break
            if avg_loss <= 0.0:  # zero loss on every carried weight
                self.trees_.append(tree)
                self.log_weights_.append(float(np.log(1e12)))
                self.avg_losses_.append(avg_loss)
                break
            beta = avg_loss / (1.0 - avg_loss)
            self.trees_.append(tree)
            self.log_weights_.append(float(self.learning_rate * np.log(1.0 / beta)))
            self.avg_losses_.append(avg_loss)
            w *= beta ** (self.learning_rate * (1.0 - losses))
            total = w.sum()
            if not np.isfinite(total) or total <= 0.0:
                break
            w /= total
        if not self.trees_:
            self.flags.append("no_round_retained")
        self.n_features_ = X.shape[1]
        self.fitted = True
        return self

    def predict(self, X):
        self._require_fitted()
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if not self.trees_:
            return np.full(X.shape[0], self.fallback_value_)
        preds = np.stack([t.predict(X) for t in self.trees_])
        weights = np.array(self.log_weights_)
        return np.array([weighted_median(preds[:, i], weights)
                         for i in range(X.shape[0])])

    def get_state(self):
        return {"trees": [t.root.to_dict() for t in self.trees_],
                "log_weights": self.log_weights_, "avg_losses": self.avg_losses_,
                "fallback": self.fallback_value_, "n_features": self.n_features_,
                "flags": list(self.flags)}

    def set_state(self, state):
        self.trees_ = []
        for d in state["trees"]:
            tree = DecisionTree(self.base_max_depth, 2)
            tree.root = TreeNode.from_dict(d)
            tree.n_features_ = int(state["n_features"])
            self.trees_.append(tree)
        self.log_weights_ = list(state["log_weights"])
        self.avg_losses_ = list(state["avg_losses"])
        self.fallback_value_ = float(state["fallback"])
        self.n_features_ = int(state["n_features"])
        self.flags = list(state["flags"])
        self.fitted = True


# -- registry and persistence ----------------------------------------------------

MODEL_REGISTRY = {
    "ols": OlsRegressor,
    "lasso": LassoRegressor,
    "elastic_net": CoordinateDescentRegressor,
    "svr": LinearSvrRegressor,
    "knn": KnnRegressor,
    "sgd": SgdLinearRegressor,
    "tree": DecisionTreeRegressor,
    "bagging": BaggingRegressor,
    "random_forest": RandomForestRegressor,
    "gbm": GbmLadRegressor,
    "adaboost": AdaboostR2Regressor,
}


def make_regressor(kind: str, params: dict | None = None, seed: int = 0) -> Regressor:
    if kind not in MODEL_REGISTRY:
        raise BadModelKind(kind, MODEL_REGISTRY)
    params = dict(params or {})
    return MODEL_REGISTRY[kind](seed=seed, **params)


def model_to_dict(model: Regressor) -> dict:
    model._require_fitted()
    return {
        "format_version": FORMAT_VERSION,
        "kind": model.kind,
        "hyperparams": model.hyperparams(),
        "seed": model.seed,
        "state": model.get_state(),
    }


def model_from_dict(doc: dict) -> Regressor:
    kind = doc["kind"]
    if kind not in MODEL_REGISTRY:
        raise BadModelKind(kind, MODEL_REGISTRY)
    model = MODEL_REGISTRY[kind](seed=doc.get("seed", 0), **doc.get("hyperparams", {}))
    model.set_state(doc["state"])
    return model


def save_model(model: Regressor, path) -> None:
    with open(path, "w") as fh:
        json.dump(model_to_dict(model), fh)
        fh.write("\n")


def load_model(path) -> Regressor:
    with open(path) as fh:
        return model_from_dict(json.load(fh))
