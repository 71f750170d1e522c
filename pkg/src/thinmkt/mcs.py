"""Model confidence set: bootstrap EPA tests, elimination and inverse-loss combination.

The test statistic is the maximum over models of the studentized mean loss
differential against the cross-model average. Standard errors and the null
distribution come from one moving-block bootstrap of the day index, drawn
once per run and reused in every elimination round so that results nest in
``alpha``.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .core import BLOCKS_PER_DAY, ModelForecast
from .errors import DataError

# block ranges (1-based, inclusive) for pooled MCS: 00-05, 05-10, 10-15, 15-18, 18-24 h
BLOCK_GROUPS = ((1, 20), (21, 40), (41, 60), (61, 72), (73, 96))


@dataclass(frozen=True, eq=False)
class LossMatrix:
    models: tuple
    days: tuple
    L: np.ndarray  # models x days

    def __post_init__(self):
        L = np.asarray(self.L, dtype=float)
        if L.ndim != 2 or L.shape != (len(self.models), len(self.days)):
            raise DataError("loss matrix shape does not match models x days")
        if len(set(self.models)) != len(self.models):
            raise DataError("duplicate model names in loss matrix")
        if L.size == 0:
            raise DataError("empty loss matrix")
        if not np.all(np.isfinite(L)) or np.any(L < 0):
            raise DataError("losses must be finite and non-negative")
        object.__setattr__(self, "L", L)

    @property
    def mean_loss(self) -> np.ndarray:
        return self.L.mean(axis=1)

    def subset(self, keep: Sequence[int]) -> "LossMatrix":
        keep = list(keep)
        return LossMatrix(tuple(self.models[i] for i in keep), self.days, self.L[keep])


@dataclass(frozen=True)
class EpaResult:
    t: np.ndarray
    dbar: np.ndarray
    se: np.ndarray
    T: float
    pvalue: float
    degenerate: bool  # some model had zero bootstrap variance but a nonzero differential


@dataclass(frozen=True, eq=False)
class SuperiorSet:
    survivors: tuple
    pvalues: Mapping[str, float]
    eliminated: tuple  # in elimination order
    alpha: float
    weights: Mapping[str, float]
    mean_loss: Mapping[str, float] = field(default_factory=dict)
    degenerate: bool = False

    def __post_init__(self):
        if not self.survivors:
            raise ValueError("superior set cannot be empty")

    def eliminated_at(self, model: str) -> int | None:
        """1-based elimination step, or None for survivors."""
        return self.eliminated.index(model) + 1 if model in self.eliminated else None


def block_indices(n: int, B: int, block_len: int, rng: np.random.Generator) -> np.ndarray:
    """``B`` moving-block resamples of ``range(n)``, shape ``(B, n)``."""
    block_len = max(1, min(block_len, n))
    n_blocks = -(-n // block_len)
    starts = rng.integers(0, n - block_len + 1, size=(B, n_blocks))
    idx = (starts[:, :, None] + np.arange(block_len)).reshape(B, -1)
    return idx[:, :n]


def _tolerance(L: np.ndarray) -> float:
    return 1e-12 * (1.0 + float(np.abs(L).max()))


def epa_from_indices(L: np.ndarray, idx: np.ndarray) -> EpaResult:
    """EPA test for a raw loss array given precomputed bootstrap indices."""
    m, n = L.shape
    if m < 2 or n < 2:
        raise DataError("EPA test needs at least two models and two days")
    d = L - L.mean(axis=0)
    dbar = d.mean(axis=1)
    boot = d[:, idx].mean(axis=2)  # models x B
    centered = boot - dbar[:, None]
    se = np.sqrt(np.mean(centered ** 2, axis=1))
    tol = _tolerance(L)
    live = se > tol
    zero_mean = np.abs(dbar) <= tol
    t = np.zeros(m)
    t[live] = dbar[live] / se[live]
    flat = ~live & ~zero_mean
    t[flat] = np.sign(dbar[flat]) * np.inf
    star = np.zeros_like(centered)
    star[live] = centered[live] / se[live, None]
    T = float(t.max())
    T_star = star.max(axis=0)
    B = idx.shape[0]
    p = (1.0 + np.count_nonzero(T_star >= T - tol)) / (B + 1.0)
    return EpaResult(t, dbar, se, T, min(p, 1.0), bool(flat.any()))


def epa_statistics(L: LossMatrix, B: int = 1000, block_len: int = 2, seed: int = 0) -> EpaResult:
    rng = np.random.default_rng(seed)
    return epa_from_indices(L.L, block_indices(len(L.days), B, block_len, rng))


def bootstrap_pvalue(L: LossMatrix, B: int = 1000, block_len: int = 2, seed: int = 0) -> float:
    if B < 100:
        raise ValueError("need at least 100 bootstrap replicates")
    return epa_statistics(L, B, block_len, seed).pvalue


def inverse_loss_weights(mean_loss: np.ndarray) -> np.ndarray:
    """Weights proportional to 1/loss; zero-loss models share all the weight."""
    mean_loss = np.asarray(mean_loss, dtype=float)
    zero = mean_loss <= 0
    if zero.any():
        return zero / zero.sum()
    inv = 1.0 / mean_loss
    return inv / inv.sum()


def _worst(res: EpaResult, means: np.ndarray, names: Sequence[str]) -> int:
    top = np.flatnonzero(res.t == res.t.max())
    return min(top, key=lambda i: (-means[i], names[i]))


def mcs_run(L: LossMatrix, alpha: float = 0.10, B: int = 1000, seed: int = 0,
            block_len: int = 2) -> SuperiorSet:
    """Eliminate the worst model while the EPA test rejects at level ``alpha``.

    With fewer than two models or two days there is nothing to test and
    every model survives.
    """
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    if B < 100:
        raise ValueError("need at least 100 bootstrap replicates")
    names = list(L.models)
    means = L.mean_loss
    alive = list(range(len(names)))
    pvals: dict = {}
    eliminated = []
    degenerate = False
    if len(names) >= 2 and len(L.days) >= 2:
        idx = block_indices(len(L.days), B, block_len, np.random.default_rng(seed))
        running = 0.0
        while len(alive) > 1:
            res = epa_from_indices(L.L[alive], idx)
            degenerate |= res.degenerate
            running = max(running, res.pvalue)
            if res.pvalue >= alpha:
                break
            k = alive[_worst(res, means[alive], [names[i] for i in alive])]
            pvals[names[k]] = running
            eliminated.append(names[k])
            alive.remove(k)
    for i in alive:
        pvals[names[i]] = 1.0
    w = inverse_loss_weights(means[alive])
    survivors = tuple(names[i] for i in alive)
    return SuperiorSet(survivors, pvals, tuple(eliminated), alpha,
                       dict(zip(survivors, w.tolist())),
                       dict(zip(names, means.tolist())), degenerate)


@dataclass(frozen=True, eq=False)
class CombinedForecast:
    date: object
    values: np.ndarray
    weights: tuple  # per block: {model: weight}

    def detail(self, block: int) -> str:
        w = self.weights[block - 1]
        return ";".join(f"{m}:{v:.6g}" for m, v in sorted(w.items()))


def combine_values(weights: Mapping[str, float], values: Mapping[str, np.ndarray]):
    missing = [m for m in weights if m not in values]
    if missing:
        raise DataError(f"no forecast for superior model(s): {', '.join(sorted(missing))}")
    out = sum(w * np.asarray(values[m], dtype=float) for m, w in weights.items())
    out = np.asarray(out, dtype=float)
    if not np.all(np.isfinite(out)):
        raise DataError("non-finite combined forecast")
    return np.maximum(out, 0.0)


def combine(ss, forecasts: Mapping[str, ModelForecast]) -> CombinedForecast:
    """Weighted sum of survivor forecasts.

    ``ss`` is either one :class:`SuperiorSet` applied to every block or a
    sequence of 96 per-block sets.
    """
    sets = [ss] * BLOCKS_PER_DAY if isinstance(ss, SuperiorSet) else list(ss)
    if len(sets) != BLOCKS_PER_DAY:
        raise DataError("need one superior set per block")
    dates = {f.date for f in forecasts.values()}
    if len(dates) > 1:
        raise DataError("forecasts target different days")
    values = {m: f.values for m, f in forecasts.items()}
    out = np.empty(BLOCKS_PER_DAY)
    for b, s in enumerate(sets):
        out[b] = combine_values(s.weights, {m: v[b:b + 1] for m, v in values.items()})[0]
    return CombinedForecast(dates.pop() if dates else None, out,
                            tuple(dict(s.weights) for s in sets))


def ssm_rows(block: int, ss: SuperiorSet, day=None):
    """Report rows ``(date, block, model, mcs_pvalue, mean_loss, weight, eliminated_at)``."""
    rows = []
    for m in list(ss.survivors) + list(ss.eliminated):
        step = ss.eliminated_at(m)
        rows.append((day, block, m, ss.pvalues[m], ss.mean_loss.get(m, float("nan")),
                     ss.weights.get(m, 0.0), "" if step is None else step))
    return rows


def ssm_csv(rows) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["date", "block", "model", "mcs_pvalue", "mean_loss", "weight", "eliminated_at"])
    for day, block, m, p, loss, wt, step in rows:
        w.writerow(["" if day is None else str(day), block, m, repr(float(p)),
                    repr(float(loss)), repr(float(wt)), step])
    return out.getvalue()


def pooled_losses(per_block: np.ndarray, group: tuple) -> np.ndarray:
    """Stack the daily losses of a block range into one longer series.

    ``per_block`` has shape (models, days, 96); the result interleaves the
    group's blocks day by day, giving ``days * width`` observations.
    """
    a, b = group
    chunk = per_block[:, :, a - 1:b]
    return chunk.reshape(chunk.shape[0], -1)


def group_of(block: int) -> tuple:
    for g in BLOCK_GROUPS:
        if g[0] <= block <= g[1]:
            return g
    raise ValueError(f"block {block} outside 1..{BLOCKS_PER_DAY}")
