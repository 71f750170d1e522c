"""Conditional-sum-of-squares ARMA machinery shared by the univariate models.

Lag polynomials are carried as (lags, coefficients) pairs so that
multiplicative seasonal forms reduce to the same recursion.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from scipy.optimize import least_squares

from ._optim import PENALTY, roots_outside_unit_circle, simplex_minimize


@njit(cache=True)
def arma_residuals(w, ar_lags, ar_coefs, ma_lags, ma_coefs, start):
    n = w.size
    e = np.zeros(n)
    for t in range(start, n):
        v = w[t]
        for i in range(ar_lags.size):
            v -= ar_coefs[i] * w[t - ar_lags[i]]
        for j in range(ma_lags.size):
            s = t - ma_lags[j]
            if s >= start:
                v -= ma_coefs[j] * e[s]
        e[t] = v
    return e


@njit(cache=True)
def _css(w, ar_lags, ar_coefs, ma_lags, ma_coefs, start):
    e = arma_residuals(w, ar_lags, ar_coefs, ma_lags, ma_coefs, start)
    s = 0.0
    for t in range(start, w.size):
        s += e[t] * e[t]
    return s


@njit(cache=True)
def arma_extend(w, e, ar_lags, ar_coefs, ma_lags, ma_coefs, horizon):
    """Append ``horizon`` conditional-mean steps to ``w`` (future shocks zero)."""
    n = w.size
    out = np.empty(n + horizon)
    out[:n] = w
    ee = np.zeros(n + horizon)
    ee[:n] = e
    for t in range(n, n + horizon):
        v = 0.0
        for i in range(ar_lags.size):
            v += ar_coefs[i] * out[t - ar_lags[i]]
        for j in range(ma_lags.size):
            v += ma_coefs[j] * ee[t - ma_lags[j]]
        out[t] = v
    return out[n:]


@njit(cache=True)
def _residuals_jac(w, phi, theta):
    """CSS residuals of ARMA(p, q) and their derivatives wrt (phi, theta)."""
    p, q = phi.size, theta.size
    n = w.size
    e = np.zeros(n)
    J = np.zeros((n, p + q))
    for t in range(p, n):
        v = w[t]
        for i in range(p):
            v -= phi[i] * w[t - i - 1]
        for j in range(q):
            s = t - j - 1
            if s >= p:
                v -= theta[j] * e[s]
        e[t] = v
        for i in range(p):
            g = -w[t - i - 1]
            for j in range(q):
                s = t - j - 1
                if s >= p:
                    g -= theta[j] * J[s, i]
            J[t, i] = g
        for k in range(q):
            g = 0.0
            s = t - k - 1
            if s >= p:
                g = -e[s]
            for j in range(q):
                s = t - j - 1
                if s >= p:
                    g -= theta[j] * J[s, p + k]
            J[t, p + k] = g
    return e[p:], J[p:]


def _lags(k):
    return np.arange(1, k + 1, dtype=np.int64)


@dataclass(frozen=True)
class ArmaFit:
    p: int
    q: int
    phi: np.ndarray
    theta: np.ndarray
    css: float
    n_eff: int

    @property
    def sigma2(self) -> float:
        return self.css / self.n_eff

    def aicc(self, extra_params: int = 0) -> float:
        return aicc(self.css, self.n_eff, self.p + self.q + 2 + extra_params)


def aicc(css: float, n: int, k: int) -> float:
    if css <= 0:
        css = np.finfo(float).tiny
    if n - k - 1 <= 0:
        return np.inf
    return n * np.log(css / n) + 2 * k + 2 * k * (k + 1) / (n - k - 1)


def residuals(w, phi, theta):
    phi = np.asarray(phi, dtype=float)
    theta = np.asarray(theta, dtype=float)
    return arma_residuals(np.asarray(w, dtype=float), _lags(phi.size), phi,
                          _lags(theta.size), theta, phi.size)


def _ols_ar(w, p):
    n = w.size
    X = np.column_stack([w[p - i - 1:n - i - 1] for i in range(p)])
    coef, *_ = np.linalg.lstsq(X, w[p:], rcond=None)
    return coef


def fit_arma(w, p, q, start=None) -> ArmaFit:
    """CSS fit of a zero-mean ARMA(p, q).

    Pure AR orders are solved exactly by least squares. With an MA part the
    residual vector is minimized by Levenberg-Marquardt using the analytic
    Jacobian; if that lands outside the stationary/invertible region the
    simplex search with a penalty takes over. ``start`` is an optional warm
    start of length p+q.
    """
    w = np.ascontiguousarray(w, dtype=float)
    n_eff = w.size - p
    ar_l, ma_l = _lags(p), _lags(q)

    def objective(x):
        phi, theta = x[:p], x[p:]
        if not roots_outside_unit_circle(phi, -1.0) or not roots_outside_unit_circle(theta, 1.0):
            return PENALTY
        return _css(w, ar_l, phi, ma_l, theta, p)

    if q == 0:
        phi = _ols_ar(w, p) if p else np.zeros(0)
        if roots_outside_unit_circle(phi, -1.0):
            return ArmaFit(p, 0, phi, np.zeros(0), float(objective(phi)), n_eff)
        start = np.zeros(p) if start is None else start

    if start is None:
        start = np.concatenate([_ols_ar(w, p) if p else np.zeros(0), np.zeros(q)])
        if not roots_outside_unit_circle(start[:p], -1.0):
            start[:p] = 0.0
    x0 = np.asarray(start, dtype=float)
    if objective(x0) >= PENALTY:
        x0 = np.zeros(p + q)
    try:
        res = least_squares(lambda x: _residuals_jac(w, x[:p], x[p:])[0], x0,
                            jac=lambda x: _residuals_jac(w, x[:p], x[p:])[1],
                            method="lm", xtol=1e-10, ftol=1e-10)
        x, f = res.x, float(objective(res.x))
    except (ValueError, np.linalg.LinAlgError):
        f = PENALTY
    if not np.isfinite(f) or f >= PENALTY:
        x, f = simplex_minimize(objective, x0)
    return ArmaFit(p, q, x[:p].copy(), x[p:].copy(), float(f), n_eff)


def forecast_arma(w, phi, theta, horizon):
    """Conditional-mean forecast of a zero-mean ARMA from history ``w``."""
    w = np.ascontiguousarray(w, dtype=float)
    phi = np.asarray(phi, dtype=float)
    theta = np.asarray(theta, dtype=float)
    ar_l, ma_l = _lags(phi.size), _lags(theta.size)
    e = arma_residuals(w, ar_l, phi, ma_l, theta, phi.size)
    return arma_extend(w, e, ar_l, phi, ma_l, theta, horizon)


def select_arma(w, orders, warm=None):
    """Fit every (p, q) in ``orders``; returns dict keyed by order."""
    warm = warm or {}
    return {(p, q): fit_arma(w, p, q, warm.get((p, q))) for p, q in orders}


def best_by_aicc(candidates, extra_params=0):
    """Pick the lowest-AICc fit, ties to smaller p+q then smaller p."""
    return min(candidates, key=lambda f: (f.aicc(extra_params), f.p + f.q, f.p))
