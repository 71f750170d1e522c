"""Regression trees with exact greedy splits and squared-loss gradient boosting.

Trees are stored as flat heap-indexed arrays: node ``k`` has children
``2k+1`` and ``2k+2``; ``feature[k] == -1`` marks a leaf. A sample goes
left when ``x[feature] <= threshold``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .errors import FitError


@dataclass(frozen=True, eq=False)
class RegressionTree:
    feature: np.ndarray  # int64, -1 for leaves and unused slots
    threshold: np.ndarray
    value: np.ndarray
    max_depth: int
    min_leaf: int

    @property
    def n_leaves(self) -> int:
        return int(np.sum(self._reachable() & (self.feature < 0)))

    def _reachable(self) -> np.ndarray:
        seen = np.zeros(self.feature.size, dtype=bool)
        seen[0] = True
        for k in range(self.feature.size):
            if seen[k] and self.feature[k] >= 0:
                seen[2 * k + 1] = seen[2 * k + 2] = True
        return seen


@dataclass(frozen=True, eq=False)
class GbmModel:
    f0: float
    features: np.ndarray  # trees x nodes
    thresholds: np.ndarray
    values: np.ndarray
    nu: float
    max_depth: int
    min_leaf: int
    loss_trace: np.ndarray = field(default_factory=lambda: np.zeros(0))
    floor: float | None = 0.0

    @property
    def n_trees(self) -> int:
        return self.features.shape[0]

    def tree(self, m: int) -> RegressionTree:
        return RegressionTree(self.features[m], self.thresholds[m], self.values[m],
                              self.max_depth, self.min_leaf)

    def split_counts(self, n_features: int) -> np.ndarray:
        f = self.features[self.features >= 0]
        return np.bincount(f, minlength=n_features)


@njit(cache=True)
def _grow(X, order, xs, r, max_depth, min_leaf, feature, threshold, value, fitted):
    """Grow one tree on targets ``r`` level by level.

    ``order[j]`` lists the rows sorted by feature j and ``xs[j]`` holds the
    matching sorted values. Writes the tree into the given arrays and the
    per-sample leaf value into ``fitted``.
    """
    n, nf = X.shape
    n_nodes = feature.size
    node = np.zeros(n, dtype=np.int64)
    cnt = np.zeros(n_nodes)
    tot = np.zeros(n_nodes)
    tot2 = np.zeros(n_nodes)
    for i in range(n):
        cnt[0] += 1.0
        tot[0] += r[i]
        tot2[0] += r[i] * r[i]
    feature[:] = -1
    threshold[:] = 0.0
    value[:] = 0.0
    lo = 0
    for depth in range(max_depth + 1):
        hi = 2 * lo + 1  # first node of the next level
        for k in range(lo, hi):
            if cnt[k] > 0:
                value[k] = tot[k] / cnt[k]
        if depth == max_depth:
            break
        best_gain = np.zeros(hi - lo)
        best_f = np.full(hi - lo, -1, dtype=np.int64)
        best_t = np.zeros(hi - lo)
        cl = np.zeros(hi - lo)
        sl = np.zeros(hi - lo)
        last = np.zeros(hi - lo)
        any_open = False
        for k in range(lo, hi):
            if cnt[k] >= 2 * min_leaf:
                any_open = True
        if not any_open:
            break
        for j in range(nf):
            cl[:] = 0.0
            sl[:] = 0.0
            for s in range(n):
                i = order[j, s]
                k = node[i]
                if k < lo:
                    continue  # sample sits in a finished leaf
                kk = k - lo
                x = xs[j, s]
                nk = cnt[k]
                if cl[kk] >= min_leaf and nk - cl[kk] >= min_leaf and x > last[kk]:
                    sr = tot[k] - sl[kk]
                    gain = (sl[kk] * sl[kk] / cl[kk] + sr * sr / (nk - cl[kk])
                            - tot[k] * tot[k] / nk)
                    if gain > best_gain[kk] * (1.0 + 1e-12) + 1e-300:
                        best_gain[kk] = gain
                        best_f[kk] = j
                        a = last[kk]
                        t = a + (x - a) / 2.0
                        if t >= x:
                            t = a
                        best_t[kk] = t
                cl[kk] += 1.0
                sl[kk] += r[i]
                last[kk] = x
        split_any = False
        for kk in range(hi - lo):
            k = lo + kk
            sse = tot2[k] - (tot[k] * tot[k] / cnt[k] if cnt[k] > 0 else 0.0)
            if best_f[kk] >= 0 and best_gain[kk] > 1e-12 * max(sse, 1e-300) and best_gain[kk] > 0:
                feature[k] = best_f[kk]
                threshold[k] = best_t[kk]
                split_any = True
        if not split_any:
            break
        for i in range(n):
            k = node[i]
            if k < lo or feature[k] < 0:
                continue
            c = 2 * k + 1 if X[i, feature[k]] <= threshold[k] else 2 * k + 2
            node[i] = c
            cnt[c] += 1.0
            tot[c] += r[i]
            tot2[c] += r[i] * r[i]
        lo = hi
    for i in range(n):
        fitted[i] = value[node[i]]


@njit(cache=True)
def _apply(feature, threshold, value, X, out, scale):
    n = X.shape[0]
    for i in range(n):
        k = 0
        while feature[k] >= 0:
            k = 2 * k + 1 if X[i, feature[k]] <= threshold[k] else 2 * k + 2
        out[i] += scale * value[k]


@njit(cache=True)
def _boost(X, order, xs, y, f0, M, nu, max_depth, min_leaf, feats, thrs, vals, trace):
    n = y.size
    F = np.full(n, f0)
    r = np.empty(n)
    fitted = np.empty(n)
    sse = 0.0
    for i in range(n):
        sse += (y[i] - f0) ** 2
    trace[0] = sse / n
    for m in range(M):
        for i in range(n):
            r[i] = y[i] - F[i]
        _grow(X, order, xs, r, max_depth, min_leaf, feats[m], thrs[m], vals[m], fitted)
        sse = 0.0
        for i in range(n):
            F[i] += nu * fitted[i]
            sse += (y[i] - F[i]) ** 2
        trace[m + 1] = sse / n
        if not np.isfinite(trace[m + 1]):
            return m + 1
    return M


def _check(X, y):
    X = np.ascontiguousarray(X, dtype=float)
    y = np.ascontiguousarray(y, dtype=float)
    if X.ndim != 2 or X.shape[0] == 0:
        raise FitError("empty training input")
    if y.shape != (X.shape[0],):
        raise FitError("targets do not match rows")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise FitError("non-finite training value")
    return X, y


def _presort(X):
    order = np.ascontiguousarray(np.argsort(X, axis=0, kind="stable").T.astype(np.int64))
    xs = np.ascontiguousarray(np.take_along_axis(X.T, order, axis=1))
    return order, xs


def fit_tree(X, y, max_depth: int = 3, min_leaf: int = 10) -> RegressionTree:
    """Greedy exact CART on squared error.

    Ties between equally good splits go to the lower feature index, then the
    lower threshold.
    """
    X, y = _check(X, y)
    if max_depth < 0 or min_leaf < 1:
        raise ValueError("need max_depth >= 0 and min_leaf >= 1")
    size = 2 ** (max_depth + 1) - 1
    feature = np.empty(size, dtype=np.int64)
    threshold = np.empty(size)
    value = np.empty(size)
    _grow(X, *_presort(X), y, max_depth, min_leaf, feature, threshold, value, np.empty(y.size))
    return RegressionTree(feature, threshold, value, max_depth, min_leaf)


def predict_tree(tree: RegressionTree, X) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    out = np.zeros(X.shape[0])
    _apply(tree.feature, tree.threshold, tree.value, X, out, 1.0)
    return out


def fit_gbm(X, y, M: int = 100, nu: float = 0.05, max_depth: int = 3, min_leaf: int = 10,
            floor: float | None = 0.0) -> GbmModel:
    """Boost ``M`` trees on squared-loss residuals with shrinkage ``nu``.

    The training-loss trace has ``M + 1`` entries (the constant model first)
    and is checked to be non-increasing.
    """
    X, y = _check(X, y)
    if M < 1:
        raise ValueError("need at least one tree")
    if not 0 < nu <= 1:
        raise ValueError("shrinkage must lie in (0, 1]")
    if max_depth < 0 or min_leaf < 1:
        raise ValueError("need max_depth >= 0 and min_leaf >= 1")
    size = 2 ** (max_depth + 1) - 1
    feats = np.empty((M, size), dtype=np.int64)
    thrs = np.empty((M, size))
    vals = np.empty((M, size))
    trace = np.empty(M + 1)
    f0 = float(y.mean())
    done = _boost(X, *_presort(X), y, f0, M, float(nu), max_depth, min_leaf,
                  feats, thrs, vals, trace)
    if done < M or not np.all(np.isfinite(trace)):
        raise FitError(f"non-finite residual at boosting iteration {done}")
    slack = 1e-10 * max(trace[0], 1e-300)
    if np.any(np.diff(trace) > slack):
        raise FitError("boosting training loss increased")
    return GbmModel(f0, feats, thrs, vals, float(nu), max_depth, min_leaf, trace, floor)


def predict_gbm(model: GbmModel, X, n_trees: int | None = None) -> np.ndarray:
    """``F0 + nu * sum of tree outputs``, optionally over the first ``n_trees``."""
    X = np.ascontiguousarray(np.atleast_2d(np.asarray(X, dtype=float)))
    out = np.full(X.shape[0], model.f0)
    m_used = model.n_trees if n_trees is None else int(n_trees)
    for m in range(m_used):
        _apply(model.features[m], model.thresholds[m], model.values[m], X, out, model.nu)
    if not np.all(np.isfinite(out)):
        raise FitError("non-finite boosted prediction")
    if model.floor is not None:
        out = np.maximum(out, model.floor)
    return out
