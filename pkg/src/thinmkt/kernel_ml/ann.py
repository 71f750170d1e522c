"""Single-hidden-layer tanh network trained by full-batch gradient descent."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import FitError
from .features import DesignMatrix


@dataclass(frozen=True)
class AnnConfig:
    hidden: int = 10
    epochs: int = 500
    learning_rate: float = 0.01
    seed: int = 0


@dataclass(frozen=True, eq=False)
class AnnModel:
    W1: np.ndarray  # hidden x features
    b1: np.ndarray
    w2: np.ndarray
    b2: float
    target_mean: float = 0.0
    target_sd: float = 1.0
    config: AnnConfig = AnnConfig()
    loss_trace: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        if self.W1.shape[0] < 1:
            raise ValueError("hidden width must be at least 1")
        for p in (self.W1, self.b1, self.w2, np.array(self.b2)):
            if not np.all(np.isfinite(p)):
                raise ValueError("non-finite network parameter")


def pack(W1, b1, w2, b2):
    return np.concatenate([W1.ravel(), b1, w2, [b2]])


def unpack(theta, h, f):
    W1 = theta[:h * f].reshape(h, f)
    b1 = theta[h * f:h * f + h]
    w2 = theta[h * f + h:h * f + 2 * h]
    return W1, b1, w2, float(theta[-1])


def forward(W1, b1, w2, b2, X):
    H = np.tanh(X @ W1.T + b1)
    return H @ w2 + b2, H


def loss_and_grad(theta, X, y, h):
    """Mean squared error and its gradient with respect to the packed parameters."""
    n, f = X.shape
    W1, b1, w2, b2 = unpack(theta, h, f)
    out, H = forward(W1, b1, w2, b2, X)
    r = out - y
    loss = float(np.mean(r ** 2))
    g_out = 2.0 * r / n
    g_w2 = H.T @ g_out
    g_b2 = g_out.sum()
    g_pre = np.outer(g_out, w2) * (1.0 - H ** 2)
    g_W1 = g_pre.T @ X
    g_b1 = g_pre.sum(axis=0)
    return loss, pack(g_W1, g_b1, g_w2, g_b2)


def fit_ann(X: DesignMatrix, config: AnnConfig = AnnConfig()) -> AnnModel:
    """Train on the standardized design; the learning rate halves whenever a
    step would raise the loss, and that step is discarded."""
    if len(X) == 0:
        raise FitError("empty design matrix")
    Z = X.rows
    y = X.scaled_targets
    n, f = Z.shape
    h = config.hidden
    if np.ptp(X.targets) == 0:
        # nothing to learn: the exact fit is the constant network
        return AnnModel(np.zeros((h, f)), np.zeros(h), np.zeros(h), 0.0, X.target_mean,
                        X.target_sd, config, np.zeros(config.epochs + 1))
    rng = np.random.default_rng(config.seed)
    bound1 = 1.0 / np.sqrt(max(f, 1))
    bound2 = 1.0 / np.sqrt(h)
    theta = pack(rng.uniform(-bound1, bound1, (h, f)), rng.uniform(-bound1, bound1, h),
                 rng.uniform(-bound2, bound2, h), float(rng.uniform(-bound2, bound2)))
    lr = config.learning_rate
    loss, grad = loss_and_grad(theta, Z, y, h)
    trace = np.empty(config.epochs)
    for epoch in range(config.epochs):
        trace[epoch] = loss
        cand = theta - lr * grad
        c_loss, c_grad = loss_and_grad(cand, Z, y, h)
        if not np.isfinite(c_loss):
            raise FitError(f"non-finite training loss at epoch {epoch + 1}")
        if c_loss > loss:
            lr *= 0.5
            continue
        theta, loss, grad = cand, c_loss, c_grad
    W1, b1, w2, b2 = unpack(theta, h, f)
    return AnnModel(W1, b1, w2, b2, X.target_mean, X.target_sd, config,
                    np.append(trace, loss))


def predict_ann(model: AnnModel, Z: np.ndarray) -> np.ndarray:
    """Forecasts in price units for standardized rows ``Z``, floored at 0."""
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    if Z.shape[0] == 0:
        return np.zeros(0)
    out, _ = forward(model.W1, model.b1, model.w2, model.b2, Z)
    values = out * model.target_sd + model.target_mean
    if not np.all(np.isfinite(values)):
        raise FitError("non-finite network output")
    return np.maximum(values, 0.0)
