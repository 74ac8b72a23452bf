"""K-medoids (PAM) clustering of speakers with silhouette-based choice of k."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .inventory import Variable
from .profiles import SpeakerProfile


class ClusteringError(ValueError):
    pass


IMPUTATIONS = ("zero", "exclude")
# Kaufman & Rousseeuw: an average width below 0.25 means no substantial structure
NO_STRUCTURE_SILHOUETTE = 0.25


@dataclass(frozen=True)
class FeatureMatrix:
    values: np.ndarray  # z-scored, n x p
    raw: np.ndarray  # unscaled measure, n x p
    speaker_ids: tuple[str, ...]
    variables: tuple[Variable, ...]
    means: np.ndarray
    sds: np.ndarray
    measure: str = "rate"

    @property
    def n(self) -> int:
        return self.values.shape[0]


def scale(raw: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Column z-scores with the n-1 standard deviation (R's ``scale``)."""
    means = raw.mean(axis=0)
    sds = raw.std(axis=0, ddof=1)
    return (raw - means) / sds, means, sds


def build_feature_matrix(profiles: Iterable[SpeakerProfile], measure: str = "rate",
                         imputation: str = "zero",
                         variables: Sequence[Variable] | None = None) -> FeatureMatrix:
    """Per-speaker matrix of the chosen measure, scaled column-wise.

    ``imputation="zero"`` keeps speakers lacking tokens for a variable at
    rate 0 (log-odds 0); ``"exclude"`` drops them.
    """
    if imputation not in IMPUTATIONS:
        raise ClusteringError(f"imputation must be one of {IMPUTATIONS}, got {imputation!r}")
    variables = tuple(variables or Variable)
    profiles = list(profiles)
    if imputation == "exclude":
        profiles = [p for p in profiles if all(p[v].has_data for v in variables)]
    if len(profiles) < 3:
        raise ClusteringError(f"need at least 3 speakers to cluster, got {len(profiles)}")
    raw = np.array([[p.value(v, measure) for v in variables] for p in profiles], dtype=float)
    if not np.all(np.isfinite(raw)):
        raise ClusteringError("non-finite feature value")
    sds = raw.std(axis=0, ddof=1)
    for v, sd in zip(variables, sds):
        if not sd > 0:
            raise ClusteringError(
                f"variable {v.label} has zero variance across speakers; "
                f"exclude it from the feature set (variables=...)")
    values, means, sds = scale(raw)
    return FeatureMatrix(values, raw, tuple(p.speaker_id for p in profiles), variables,
                         means, sds, measure)


def euclidean_distances(x: np.ndarray) -> np.ndarray:
    # row-wise differences rather than the Gram trick: exact symmetry, no cancellation
    x = np.asarray(x, dtype=float)
    d = np.empty((x.shape[0], x.shape[0]))
    for i in range(x.shape[0]):
        d[i] = np.sqrt(np.sum((x - x[i]) ** 2, axis=1))
    return d


@dataclass(frozen=True)
class ClusteringResult:
    k: int
    medoids: tuple[int, ...]
    labels: np.ndarray
    total_deviation: float
    avg_silhouette: float
    widths: np.ndarray = field(repr=False, default=None)

    def sizes(self) -> list[int]:
        return [int(np.sum(self.labels == c)) for c in range(self.k)]


def _check_dist(dist) -> np.ndarray:
    d = np.asarray(dist, dtype=float)
    if d.ndim != 2 or d.shape[0] != d.shape[1]:
        raise ClusteringError("distance matrix must be square")
    if not np.allclose(d, d.T) or np.any(np.diag(d) != 0) or np.any(d < 0):
        raise ClusteringError("distance matrix must be symmetric, non-negative, zero on the diagonal")
    return d


def _assign(d: np.ndarray, medoids: Sequence[int]) -> tuple[np.ndarray, float]:
    sub = d[:, list(medoids)]
    labels = np.argmin(sub, axis=1)
    labels[list(medoids)] = np.arange(len(medoids))
    return labels, float(sub[np.arange(d.shape[0]), labels].sum())


def _build(d: np.ndarray, k: int) -> list[int]:
    medoids = [int(np.argmin(d.sum(axis=1)))]
    nearest = d[:, medoids[0]].copy()
    for _ in range(1, k):
        gains = np.maximum(nearest[:, None] - d, 0.0).sum(axis=0)
        gains[medoids] = -np.inf
        best = int(np.argmax(gains))
        medoids.append(best)
        np.minimum(nearest, d[:, best], out=nearest)
    return medoids


def _swap(d: np.ndarray, medoids: list[int], trace: list[float] | None = None) -> list[int]:
    n = d.shape[0]
    medoids = list(medoids)
    current = d[:, medoids].min(axis=1).sum()
    if trace is not None:
        trace.append(float(current))
    while True:
        best_total, best_pair = current, None
        for mi in range(len(medoids)):
            others = [m for j, m in enumerate(medoids) if j != mi]
            rest = d[:, others].min(axis=1) if others else np.full(n, np.inf)
            # total deviation for every candidate replacement h at once
            totals = np.minimum(rest[:, None], d).sum(axis=0)
            totals[medoids] = np.inf
            h = int(np.argmin(totals))
            if totals[h] < best_total - 1e-12 * max(1.0, abs(best_total)):
                best_total, best_pair = totals[h], (mi, h)
        if best_pair is None:
            return medoids
        medoids[best_pair[0]] = best_pair[1]
        current = best_total
        if trace is not None:
            trace.append(float(current))


def pam(dist, k: int, n_starts: int = 0, seed: int | None = None,
        trace: list[float] | None = None) -> ClusteringResult:
    """Partitioning around medoids: greedy BUILD, then best-improvement SWAP.

    Deterministic by default. ``n_starts`` > 0 adds that many random
    initial medoid sets (drawn from ``seed``), each refined by SWAP; the
    lowest total deviation wins, with the BUILD start preferred on ties.
    Clusters are numbered by ascending medoid index.
    """
    d = _check_dist(dist)
    n = d.shape[0]
    if not 2 <= k < n:
        raise ClusteringError(f"k must satisfy 2 <= k < n (n={n}), got {k}")
    best = _swap(d, _build(d, k), trace)
    best_dev = _assign(d, best)[1]
    if n_starts:
        rng = np.random.default_rng(seed)
        for _ in range(n_starts):
            start = [int(i) for i in rng.choice(n, size=k, replace=False)]
            cand = _swap(d, start)
            dev = _assign(d, cand)[1]
            if dev < best_dev - 1e-12:
                best, best_dev = cand, dev
    medoids = tuple(sorted(best))
    labels, total = _assign(d, medoids)
    widths = silhouette_widths(d, labels)
    return ClusteringResult(k, medoids, labels, total, float(widths.mean()), widths)


def silhouette_widths(dist, labels) -> np.ndarray:
    d = np.asarray(dist, dtype=float)
    labels = np.asarray(labels)
    clusters = np.unique(labels)
    if clusters.size < 2:
        raise ClusteringError("silhouette needs at least two clusters")
    n = d.shape[0]
    widths = np.zeros(n)
    members = {c: np.flatnonzero(labels == c) for c in clusters}
    for i in range(n):
        own = members[labels[i]]
        if own.size == 1:
            continue
        a = d[i, own].sum() / (own.size - 1)
        b = min(d[i, members[c]].mean() for c in clusters if c != labels[i])
        denom = max(a, b)
        widths[i] = (b - a) / denom if denom > 0 else 0.0
    return widths


def silhouette(result: ClusteringResult, dist) -> tuple[np.ndarray, float]:
    widths = silhouette_widths(dist, result.labels)
    return widths, float(widths.mean())


@dataclass(frozen=True)
class OptimalK:
    k: int
    curve: dict[int, float]
    results: dict[int, ClusteringResult] = field(repr=False)

    @property
    def best(self) -> ClusteringResult:
        return self.results[self.k]

    @property
    def has_structure(self) -> bool:
        return self.curve[self.k] >= NO_STRUCTURE_SILHOUETTE


def optimal_k(dist, k_range: Iterable[int] = range(2, 11), **pam_kwargs) -> OptimalK:
    """Choose k by maximum average silhouette width (ties: smallest k)."""
    d = _check_dist(dist)
    ks = sorted(set(k_range))
    if not ks or ks[0] < 2:
        raise ClusteringError("k range must start at 2 or above")
    if d.shape[0] <= ks[-1]:
        raise ClusteringError(f"need more speakers ({d.shape[0]}) than the largest k ({ks[-1]})")
    results = {k: pam(d, k, **pam_kwargs) for k in ks}
    curve = {k: r.avg_silhouette for k, r in results.items()}
    best = max(ks, key=lambda k: (curve[k], -k))
    return OptimalK(best, curve, results)


@dataclass(frozen=True)
class Composition:
    clusters: tuple[int, ...]
    categories: tuple[str, ...]
    counts: np.ndarray  # clusters x categories
    threshold: float = 0.75

    def category_shares(self) -> np.ndarray:
        """Share of each category's speakers falling in each cluster (columns sum to 1)."""
        totals = self.counts.sum(axis=0)
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(totals > 0, self.counts / np.where(totals > 0, totals, 1), 0.0)

    def cluster_shares(self) -> np.ndarray:
        totals = self.counts.sum(axis=1, keepdims=True)
        return np.where(totals > 0, self.counts / np.where(totals > 0, totals, 1), 0.0)

    def max_share(self) -> dict[str, float]:
        shares = self.category_shares()
        return {cat: float(shares[:, j].max()) for j, cat in enumerate(self.categories)}

    def verdicts(self) -> dict[str, bool]:
        return {cat: share > self.threshold for cat, share in self.max_share().items()}

    def to_dict(self) -> dict:
        shares = self.category_shares()
        return {
            "clusters": [c + 1 for c in self.clusters],
            "categories": list(self.categories),
            "counts": self.counts.tolist(),
            "category_percent": (100.0 * shares).tolist(),
            "cluster_percent": (100.0 * self.cluster_shares()).tolist(),
            "max_share": self.max_share(),
            "threshold": self.threshold,
            "verdict": self.verdicts(),
        }


def cluster_composition(result: ClusteringResult, speaker_ids: Sequence[str],
                        categories: Mapping[str, str], threshold: float = 0.75) -> Composition:
    """Cross-tabulate cluster assignments against a speaker category.

    ``categories`` maps speaker id to a label (displacement profile by
    default); speakers without a label are counted under ``"unknown"``.
    """
    labels = [categories.get(sid, "unknown") for sid in speaker_ids]
    cats = tuple(sorted(set(labels)))
    ci = {c: j for j, c in enumerate(cats)}
    counts = np.zeros((result.k, len(cats)), dtype=int)
    for cl, lab in zip(result.labels, labels):
        counts[int(cl), ci[lab]] += 1
    return Composition(tuple(range(result.k)), cats, counts, threshold)


def cluster_means(result: ClusteringResult, raw: np.ndarray) -> np.ndarray:
    """Unscaled per-cluster mean of each feature column (k x p)."""
    raw = np.asarray(raw, dtype=float)
    return np.array([raw[result.labels == c].mean(axis=0) for c in range(result.k)])
