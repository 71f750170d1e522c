"""Epsilon-insensitive support vector regression.

The dual is solved by sequential minimal optimization over pairs of the
2n bounded variables (one for each side of the tube), with second-order
working-set selection. Targets are standardized before solving, so the
tube width ``epsilon`` is in standard-deviation units of the target.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from numba import njit

from ..errors import FitError
from .features import DesignMatrix

KERNELS = ("radial", "linear")
TAU = 1e-12


@dataclass(frozen=True)
class SvrConfig:
    kernel: str = "radial"
    C: float = 1.0
    epsilon: float = 0.1
    gamma: float | None = None  # None -> 1 / n_features
    tol: float = 1e-3
    max_iter: int = 1_000_000


@dataclass(frozen=True, eq=False)
class SvrModel:
    kernel: str
    gamma: float
    C: float
    epsilon: float
    support_vectors: np.ndarray
    dual_coef: np.ndarray
    bias: float
    target_mean: float = 0.0
    target_sd: float = 1.0
    kkt_residual: float = 0.0
    converged: bool = True
    iterations: int = 0

    @property
    def weights(self) -> np.ndarray:
        """Primal weight vector (linear kernel only)."""
        if self.kernel != "linear":
            raise ValueError("primal weights exist only for the linear kernel")
        return self.dual_coef @ self.support_vectors


def kernel_matrix(A, B, kernel, gamma):
    if kernel == "linear":
        return A @ B.T
    sq = (A ** 2).sum(1)[:, None] + (B ** 2).sum(1)[None, :] - 2.0 * A @ B.T
    return np.exp(-gamma * np.maximum(sq, 0.0))


@njit(cache=True)
def _smo(K, y, C, eps, tol, max_iter):
    n = y.size
    l2 = 2 * n
    alpha = np.zeros(l2)
    G = np.empty(l2)
    sign = np.empty(l2)
    for s in range(n):
        sign[s] = 1.0
        sign[s + n] = -1.0
        G[s] = eps - y[s]
        G[s + n] = eps + y[s]
    it = 0
    gap = np.inf
    while it < max_iter:
        # maximal violating index in the up set
        gmax = -np.inf
        i = -1
        for t in range(l2):
            if sign[t] > 0:
                if alpha[t] < C and -G[t] >= gmax:
                    if -G[t] > gmax:
                        gmax = -G[t]
                        i = t
            else:
                if alpha[t] > 0 and G[t] >= gmax:
                    if G[t] > gmax:
                        gmax = G[t]
                        i = t
        gmin = np.inf
        j = -1
        best = np.inf
        if i >= 0:
            ki = i % n
            for t in range(l2):
                kt = t % n
                in_low = (sign[t] > 0 and alpha[t] > 0) or (sign[t] < 0 and alpha[t] < C)
                if not in_low:
                    continue
                v = -sign[t] * G[t]
                if v < gmin:
                    gmin = v
                b = gmax - v
                if b > 0:
                    a = K[ki, ki] + K[kt, kt] - 2.0 * K[ki, kt]
                    if a <= 0:
                        a = TAU
                    obj = -(b * b) / a
                    if obj < best:
                        best = obj
                        j = t
        gap = gmax - gmin
        if i < 0 or j < 0 or gap < tol:
            break
        it += 1
        ki = i % n
        kj = j % n
        yi = sign[i]
        yj = sign[j]
        Qii = K[ki, ki]
        Qjj = K[kj, kj]
        Qij = yi * yj * K[ki, kj]
        old_i = alpha[i]
        old_j = alpha[j]
        if yi != yj:
            quad = Qii + Qjj + 2.0 * Qij
            if quad <= 0:
                quad = TAU
            delta = (-G[i] - G[j]) / quad
            diff = alpha[i] - alpha[j]
            alpha[i] += delta
            alpha[j] += delta
            if diff > 0:
                if alpha[j] < 0:
                    alpha[j] = 0.0
                    alpha[i] = diff
            else:
                if alpha[i] < 0:
                    alpha[i] = 0.0
                    alpha[j] = -diff
            if diff > 0:
                if alpha[i] > C:
                    alpha[i] = C
                    alpha[j] = C - diff
            else:
                if alpha[j] > C:
                    alpha[j] = C
                    alpha[i] = C + diff
        else:
            quad = Qii + Qjj - 2.0 * Qij
            if quad <= 0:
                quad = TAU
            delta = (G[i] - G[j]) / quad
            total = alpha[i] + alpha[j]
            alpha[i] -= delta
            alpha[j] += delta
            if total > C:
                if alpha[i] > C:
                    alpha[i] = C
                    alpha[j] = total - C
            else:
                if alpha[j] < 0:
                    alpha[j] = 0.0
                    alpha[i] = total
            if total > C:
                if alpha[j] > C:
                    alpha[j] = C
                    alpha[i] = total - C
            else:
                if alpha[i] < 0:
                    alpha[i] = 0.0
                    alpha[j] = total
        di = alpha[i] - old_i
        dj = alpha[j] - old_j
        for t in range(l2):
            kt = t % n
            G[t] += sign[t] * (yi * K[kt, ki] * di + yj * K[kt, kj] * dj)

    # bias from free variables, else midpoint of the feasible interval
    ub = np.inf
    lb = -np.inf
    nfree = 0
    sfree = 0.0
    for t in range(l2):
        yG = sign[t] * G[t]
        if alpha[t] >= C:
            if sign[t] < 0:
                ub = min(ub, yG)
            else:
                lb = max(lb, yG)
        elif alpha[t] <= 0:
            if sign[t] > 0:
                ub = min(ub, yG)
            else:
                lb = max(lb, yG)
        else:
            nfree += 1
            sfree += yG
    rho = sfree / nfree if nfree > 0 else (ub + lb) / 2.0
    beta = alpha[:n] - alpha[n:]
    return beta, -rho, gap, it


def fit_svr(X: DesignMatrix, config: SvrConfig = SvrConfig()) -> SvrModel:
    if len(X) == 0:
        raise FitError("empty design matrix")
    if config.kernel not in KERNELS:
        raise ValueError(f"unknown kernel {config.kernel!r}")
    if not config.C > 0 or config.epsilon < 0:
        raise ValueError("need C > 0 and epsilon >= 0")
    gamma = config.gamma if config.gamma is not None else 1.0 / max(X.n_features, 1)
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    Z = np.ascontiguousarray(X.rows)
    K = kernel_matrix(Z, Z, config.kernel, gamma)
    y = np.ascontiguousarray(X.scaled_targets)
    beta, bias, gap, it = _smo(K, y, float(config.C), float(config.epsilon),
                               float(config.tol), int(config.max_iter))
    converged = bool(gap < config.tol)
    if not converged:
        warnings.warn(f"SVR stopped after {it} iterations with KKT gap {gap:.3g}", stacklevel=2)
    beta = np.clip(beta, -config.C, config.C)
    active = np.flatnonzero(beta != 0)
    return SvrModel(config.kernel, gamma, config.C, config.epsilon, Z[active].copy(),
                    beta[active].copy(), float(bias), X.target_mean, X.target_sd,
                    float(max(gap, 0.0)), converged, int(it))


def decision_function(model: SvrModel, Z) -> np.ndarray:
    """Standardized-scale SVR output for standardized rows."""
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    if Z.shape[0] == 0:
        return np.zeros(0)
    if model.dual_coef.size == 0:
        return np.full(Z.shape[0], model.bias)
    K = kernel_matrix(Z, model.support_vectors, model.kernel, model.gamma)
    return K @ model.dual_coef + model.bias


def predict_svr(model: SvrModel, Z) -> np.ndarray:
    Z = np.asarray(Z, dtype=float)
    if Z.size == 0:
        return np.zeros(0)
    values = decision_function(model, Z) * model.target_sd + model.target_mean
    if not np.all(np.isfinite(values)):
        raise FitError("non-finite SVR output")
    return np.maximum(values, 0.0)
