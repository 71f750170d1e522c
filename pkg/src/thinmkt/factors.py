"""Driver screening and principal components of the correlation matrix."""
from __future__ import annotations

import csv
import io
import warnings
from dataclasses import dataclass

import numpy as np

from .core import BLOCKS_PER_DAY, DriverMatrix
from .errors import DataError

EXPLAINED_TARGET = 0.80


@dataclass(frozen=True)
class DropRecord:
    column: str
    reason: str
    trailing_sd: float


def variance_screen(m: DriverMatrix, window_days: int = 30, threshold: float = 1e-3):
    """Drop columns that barely moved over the trailing window.

    A column goes when its sample sd over the last ``window_days`` days is
    below ``threshold * (|mean| + 1)``. Returns ``(matrix, drop_records)``.
    """
    rows = window_days * BLOCKS_PER_DAY
    if len(m) < rows:
        raise DataError(f"variance screen needs {window_days} days of driver rows")
    tail = m.values[-rows:]
    sd = tail.std(axis=0, ddof=1)
    mean = tail.mean(axis=0)
    keep = sd >= threshold * (np.abs(mean) + 1.0)
    report = [DropRecord(c, f"trailing {window_days}d sd below threshold", float(s))
              for c, s, k in zip(m.columns, sd, keep) if not k]
    if not keep.any():
        raise DataError("variance screen dropped every driver column")
    kept = [c for c, k in zip(m.columns, keep) if k]
    return m.select(kept), report


def drop_report_csv(report) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["column", "reason", "trailing_sd"])
    for r in report:
        w.writerow([r.column, r.reason, repr(r.trailing_sd)])
    return out.getvalue()


def jacobi_eigh(A, tol: float = 1e-10, max_sweeps: int = 100):
    """Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.

    Sweeps until the off-diagonal Frobenius norm drops below ``tol``.
    Returns unsorted ``(eigenvalues, eigenvectors)`` with vectors in columns.
    """
    A = np.array(A, dtype=float)
    n = A.shape[0]
    V = np.eye(n)
    for _ in range(max_sweeps):
        off = np.sqrt(np.sum(np.tril(A, -1) ** 2) * 2)
        if off < tol:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if abs(apq) < 1e-300:
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0)) if theta else 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                ap, aq = A[:, p].copy(), A[:, q].copy()
                A[:, p] = c * ap - s * aq
                A[:, q] = s * ap + c * aq
                ap, aq = A[p, :].copy(), A[q, :].copy()
                A[p, :] = c * ap - s * aq
                A[q, :] = s * ap + c * aq
                A[p, q] = A[q, p] = 0.0
                vp, vq = V[:, p].copy(), V[:, q].copy()
                V[:, p] = c * vp - s * vq
                V[:, q] = s * vp + c * vq
    else:
        raise RuntimeError("Jacobi rotations did not converge")
    return np.diag(A).copy(), V


@dataclass(frozen=True, eq=False)
class PcaModel:
    columns: tuple
    means: np.ndarray
    sds: np.ndarray
    loadings: np.ndarray  # columns x components, orthonormal columns
    eigenvalues: np.ndarray  # descending
    k: int

    @property
    def explained_ratio(self) -> np.ndarray:
        return np.cumsum(self.eigenvalues) / self.eigenvalues.sum()

    @property
    def retained(self) -> np.ndarray:
        return self.loadings[:, :self.k]


def retained_components(eigenvalues, target: float = EXPLAINED_TARGET) -> int:
    """Smallest k whose cumulative share of the eigenvalue sum reaches ``target``."""
    ratio = np.cumsum(eigenvalues) / np.sum(eigenvalues)
    return int(np.argmax(ratio >= target - 1e-12)) + 1


def pca_fit(m: DriverMatrix, target: float = EXPLAINED_TARGET) -> PcaModel:
    X = m.values
    n, f = X.shape
    if f < 2:
        raise DataError("PCA needs at least two driver columns")
    if n < f + 1:
        raise DataError(f"PCA needs at least {f + 1} rows, got {n}")
    means = X.mean(axis=0)
    sds = X.std(axis=0)
    live = sds > 1e-12 * np.maximum(1.0, np.abs(means))
    if not live.any():
        raise DataError("driver matrix has zero total variance")
    if not live.all():
        dead = [c for c, a in zip(m.columns, live) if not a]
        warnings.warn(f"PCA ignoring constant columns: {', '.join(dead)}", stacklevel=2)
    cols = tuple(c for c, a in zip(m.columns, live) if a)
    Z = (X[:, live] - means[live]) / sds[live]
    R = Z.T @ Z / n
    R = (R + R.T) / 2
    vals, vecs = jacobi_eigh(R)
    order = sorted(range(vals.size), key=lambda i: (-vals[i], i))
    vals = np.maximum(vals[order], 0.0)
    vecs = vecs[:, order]
    for j in range(vecs.shape[1]):
        if vecs[np.argmax(np.abs(vecs[:, j])), j] < 0:
            vecs[:, j] = -vecs[:, j]
    k = retained_components(vals, target)
    return PcaModel(cols, means[live], sds[live], vecs, vals, k)


def pca_project(model: PcaModel, m: DriverMatrix, all_components: bool = False) -> DriverMatrix:
    """Factor scores (standardized rows times retained loadings) as a matrix."""
    missing = [c for c in model.columns if c not in m.columns]
    if missing:
        raise DataError(f"driver matrix lacks fitted columns: {', '.join(missing)}")
    X = m.select(list(model.columns)).values
    Z = (X - model.means) / model.sds
    L = model.loadings if all_components else model.retained
    scores = Z @ L
    names = tuple(f"pc{i + 1}" for i in range(L.shape[1]))
    return DriverMatrix(m.start, names, scores)
