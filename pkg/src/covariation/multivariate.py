"""PCA of the scaled speaker matrix via cyclic Jacobi eigendecomposition."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Sequence, TextIO

import numpy as np

from .clustering import FeatureMatrix


class PcaError(ValueError):
    pass


def jacobi_eigh(a: np.ndarray, tol: float = 1e-12, max_sweeps: int = 100) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues and eigenvectors (columns) of a symmetric matrix.

    Cyclic Jacobi: sweep over every off-diagonal pair, annihilating each with
    a plane rotation, until the off-diagonal Frobenius norm drops below
    ``tol`` (relative to the full norm).
    """
    a = np.array(a, dtype=float)
    n = a.shape[0]
    if a.shape != (n, n) or not np.allclose(a, a.T):
        raise PcaError("jacobi_eigh needs a symmetric square matrix")
    v = np.eye(n)
    scale = max(np.linalg.norm(a), 1e-300)
    for _ in range(max_sweeps):
        off = np.sqrt(np.sum(a ** 2) - np.sum(np.diag(a) ** 2))
        if off < tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                if a[p, q] == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * a[p, q])
                t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0)) if theta else 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                # A <- J^T A J with J the (p, q) rotation
                ap, aq = a[:, p].copy(), a[:, q].copy()
                a[:, p] = c * ap - s * aq
                a[:, q] = s * ap + c * aq
                ap, aq = a[p, :].copy(), a[q, :].copy()
                a[p, :] = c * ap - s * aq
                a[q, :] = s * ap + c * aq
                vp, vq = v[:, p].copy(), v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    else:
        raise PcaError("Jacobi iteration did not converge")
    return np.diag(a).copy(), v


@dataclass(frozen=True)
class PcaResult:
    eigenvalues: np.ndarray
    variance_proportion: np.ndarray
    loadings: np.ndarray  # columns are components
    scores: np.ndarray
    speaker_ids: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "eigenvalues": self.eigenvalues.tolist(),
            "variance_proportion": self.variance_proportion.tolist(),
            "loadings": self.loadings.tolist(),
        }


def pca(matrix: FeatureMatrix | np.ndarray, speaker_ids: Sequence[str] = ()) -> PcaResult:
    """Principal components of an already-scaled n x p matrix.

    Components are ordered by decreasing eigenvalue and each is signed so
    that its largest-magnitude loading is positive.
    """
    if isinstance(matrix, FeatureMatrix):
        speaker_ids = matrix.speaker_ids
        x = matrix.values
    else:
        x = np.asarray(matrix, dtype=float)
    if x.ndim != 2 or x.shape[0] < 4:
        raise PcaError(f"PCA needs a 2-d matrix with at least 4 rows, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise PcaError("non-finite value in PCA input")
    n = x.shape[0]
    cov = (x.T @ x) / (n - 1)
    cov = (cov + cov.T) / 2.0
    eigvals, vecs = jacobi_eigh(cov)
    order = np.argsort(-eigvals, kind="stable")
    eigvals = np.clip(eigvals[order], 0.0, None)
    vecs = vecs[:, order]
    for j in range(vecs.shape[1]):
        if vecs[np.argmax(np.abs(vecs[:, j])), j] < 0:
            vecs[:, j] = -vecs[:, j]
    total = eigvals.sum()
    if total <= 0:
        raise PcaError("PCA input has no variance")
    return PcaResult(eigvals, eigvals / total, vecs, x @ vecs, tuple(speaker_ids))


PROJECTION_COLUMNS = ("speaker_id", "dim1", "dim2", "cluster")


def project_2d(result: PcaResult, labels: Sequence[int] | None = None) -> list[tuple[str, float, float, int | None]]:
    """First two component scores per speaker, joined with 1-based cluster labels."""
    if result.scores.shape[0] == 0:
        raise PcaError("empty PCA result")
    if result.scores.shape[1] < 2:
        raise PcaError("need at least two components")
    ids = result.speaker_ids or tuple(str(i) for i in range(result.scores.shape[0]))
    return [(sid, float(row[0]), float(row[1]), None if labels is None else int(labels[i]) + 1)
            for i, (sid, row) in enumerate(zip(ids, result.scores))]


def write_projection(rows, sink: TextIO) -> None:
    writer = csv.writer(sink, lineterminator="\n")
    writer.writerow(PROJECTION_COLUMNS)
    for sid, d1, d2, cl in rows:
        writer.writerow([sid, repr(d1), repr(d2), "" if cl is None else cl])
