"""Density clustering, cluster prototypes, and memory-bank probabilities."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .core import (
    EmptyClusterError,
    FeatureMatrix,
    LabelOutOfRangeError,
    NOISE,
    ShapeMismatchError,
    l2_normalize_rows,
    pairwise_sq_dists,
)
from .affinity import AffinityKind, jaccard_affinity, k_reciprocal_sets


class DistanceMetric(Enum):
    EUCLIDEAN = "euclidean"
    JACCARD_DISTANCE = "jaccard_distance"


@dataclass(frozen=True)
class ClusterAssignment:
    """Per-instance cluster ids in [0, k) plus NOISE (-1) for outliers."""

    labels: np.ndarray
    k: int

    def __post_init__(self):
        lab = np.asarray(self.labels, dtype=np.int64)
        if lab.ndim != 1:
            raise ShapeMismatchError("cluster labels must be 1-d")
        if lab.size and (lab.min() < NOISE or lab.max() >= self.k):
            raise LabelOutOfRangeError("cluster id outside [-1, k)")
        clustered = lab[lab != NOISE]
        if self.k != (int(clustered.max()) + 1 if clustered.size else 0):
            raise LabelOutOfRangeError("k does not match the largest cluster id + 1")
        object.__setattr__(self, "labels", lab)

    @property
    def n(self) -> int:
        return self.labels.shape[0]

    def members(self, cluster: int) -> np.ndarray:
        return np.flatnonzero(self.labels == cluster)

    def clustered_indices(self) -> np.ndarray:
        return np.flatnonzero(self.labels != NOISE)


@dataclass(frozen=True)
class MemoryBank:
    """K x d unit-row prototype matrix with its softmax temperature and momentum."""

    prototypes: np.ndarray
    tau: float
    mu: float

    def __post_init__(self):
        p = np.asarray(self.prototypes, dtype=np.float64)
        if p.ndim != 2 or p.shape[0] == 0:
            raise ShapeMismatchError("prototype matrix must be nonempty 2-d")
        if not np.allclose(np.linalg.norm(p, axis=1), 1.0, atol=1e-6):
            raise ShapeMismatchError("prototypes are not unit-normalized")
        if self.tau <= 0.0 or not (0.0 <= self.mu <= 1.0):
            raise ValueError("bad bank parameters")
        object.__setattr__(self, "prototypes", p)

    @property
    def k(self) -> int:
        return self.prototypes.shape[0]

    @property
    def dim(self) -> int:
        return self.prototypes.shape[1]


def _pairwise_distance(features, metric: DistanceMetric, kappa: int) -> np.ndarray:
    data = features.data if isinstance(features, FeatureMatrix) else np.asarray(features)
    if metric is DistanceMetric.EUCLIDEAN:
        return np.sqrt(pairwise_sq_dists(data, data))
    aff = jaccard_affinity(
        k_reciprocal_sets(data, kappa), AffinityKind.HOMOGENEOUS_V
    )
    return 1.0 - aff.values


def dbscan(
    features,
    eps: float,
    min_samples: int,
    metric: DistanceMetric = DistanceMetric.EUCLIDEAN,
    kappa: int = 30,
) -> ClusterAssignment:
    """Deterministic DBSCAN over a dense pairwise distance matrix.

    Points are scanned in index order; cluster ids are assigned in order of
    first core-point discovery, and a border point reachable from several
    clusters stays with the first one that claimed it. ``kappa`` only matters
    for the Jaccard distance, which is computed from k-reciprocal sets.
    """
    dist = _pairwise_distance(features, metric, kappa)
    n = dist.shape[0]
    neighborhoods = [np.flatnonzero(dist[i] <= eps) for i in range(n)]
    labels = np.full(n, NOISE, dtype=np.int64)
    visited = np.zeros(n, dtype=bool)
    cid = 0
    for i in range(n):
        if visited[i]:
            continue
        visited[i] = True
        seeds = neighborhoods[i]
        if seeds.size < min_samples:
            continue  # stays noise unless a later cluster claims it as border
        labels[i] = cid
        queue = deque(seeds)
        while queue:
            j = queue.popleft()
            if not visited[j]:
                visited[j] = True
                reach = neighborhoods[j]
                if reach.size >= min_samples:
                    queue.extend(reach)
            if labels[j] == NOISE:
                labels[j] = cid
        cid += 1
    return ClusterAssignment(labels, cid)


def centroids(features, assign: ClusterAssignment, tau: float, mu: float) -> MemoryBank:
    """Mean feature per cluster, L2-normalized. Noise instances are ignored."""
    data = features.data if isinstance(features, FeatureMatrix) else np.asarray(features)
    if data.shape[0] != assign.n:
        raise ShapeMismatchError("feature and assignment sizes differ")
    if assign.k == 0:
        raise EmptyClusterError(0)
    protos = np.zeros((assign.k, data.shape[1]), dtype=np.float64)
    for c in range(assign.k):
        members = assign.members(c)
        if members.size == 0:
            raise EmptyClusterError(c)
        protos[c] = data[members].mean(axis=0)
    return MemoryBank(l2_normalize_rows(protos), tau, mu)


def memory_probabilities(features, bank: MemoryBank, tau: float | None = None) -> np.ndarray:
    """Softmax over prototype similarities: row i is P(f_i | bank, tau).

    Computed with max subtraction so extreme temperatures stay finite.
    """
    data = features.data if isinstance(features, FeatureMatrix) else np.asarray(features)
    if data.ndim == 1:
        data = data[None, :]
    if data.shape[1] != bank.dim:
        raise ShapeMismatchError("feature dim does not match bank dim")
    t = bank.tau if tau is None else float(tau)
    logits = (data @ bank.prototypes.T) / t
    logits -= logits.max(axis=1, keepdims=True)
    p = np.exp(logits)
    p /= p.sum(axis=1, keepdims=True)
    return p


def memory_probability(feature, bank: MemoryBank, tau: float | None = None) -> np.ndarray:
    """Single-row convenience wrapper around memory_probabilities."""
    return memory_probabilities(np.asarray(feature)[None, :], bank, tau)[0]
