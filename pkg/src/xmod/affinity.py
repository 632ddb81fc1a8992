"""Instance-to-instance affinities.

Homogeneous (same modality) affinity is the Jaccard overlap of mutual
k-reciprocal neighbor sets; heterogeneous affinity comes from an optimal
transport plan (see transport.py). Both are consumed row-normalized.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .core import FeatureMatrix, ShapeMismatchError, pairwise_sq_dists


class AffinityKind(Enum):
    HOMOGENEOUS_V = "homogeneous_visible"
    HOMOGENEOUS_R = "homogeneous_infrared"
    HETERO_VR = "heterogeneous_visible_to_infrared"
    HETERO_RV = "heterogeneous_infrared_to_visible"

    @property
    def homogeneous(self) -> bool:
        return self in (AffinityKind.HOMOGENEOUS_V, AffinityKind.HOMOGENEOUS_R)


@dataclass(frozen=True)
class AffinityMatrix:
    values: np.ndarray
    kind: AffinityKind

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2:
            raise ShapeMismatchError("affinity must be 2-d")
        if self.kind.homogeneous and v.shape[0] != v.shape[1]:
            raise ShapeMismatchError("homogeneous affinity must be square")
        object.__setattr__(self, "values", v)

    @property
    def shape(self):
        return self.values.shape


def k_reciprocal_sets(features, kappa: int) -> list[np.ndarray]:
    """Mutual k-reciprocal neighbor sets R(i, kappa), each sorted ascending.

    kNN(i, kappa) always contains i itself; remaining slots are filled by
    Euclidean distance with ties at the cutoff broken toward lower index.
    """
    data = features.data if isinstance(features, FeatureMatrix) else np.asarray(features)
    n = data.shape[0]
    if kappa < 1:
        raise ValueError("kappa must be >= 1")
    k = min(kappa, n)
    d = pairwise_sq_dists(data, data)
    # Self wins rank 0 unconditionally, even against exact duplicates.
    np.fill_diagonal(d, -1.0)
    order = np.argsort(d, axis=1, kind="stable")
    member = np.zeros((n, n), dtype=bool)
    rows = np.repeat(np.arange(n), k)
    member[rows, order[:, :k].ravel()] = True
    mutual = member & member.T
    return [np.flatnonzero(mutual[i]) for i in range(n)]


def jaccard_affinity(sets: list[np.ndarray], kind: AffinityKind) -> AffinityMatrix:
    """S_ij = |R(i) n R(j)| / |R(i) u R(j)|. Symmetric with unit diagonal."""
    if not kind.homogeneous:
        raise ShapeMismatchError("jaccard affinity is defined within one modality")
    n = len(sets)
    member = np.zeros((n, n), dtype=np.float64)
    for i, s in enumerate(sets):
        member[i, s] = 1.0
    inter = member @ member.T
    sizes = member.sum(axis=1)
    union = sizes[:, None] + sizes[None, :] - inter
    return AffinityMatrix(inter / union, kind)


def row_normalize(aff: AffinityMatrix) -> AffinityMatrix:
    """Scale each row to sum 1.

    An all-zero row cannot be scaled; homogeneous matrices fall back to the
    self one-hot (the instance only trusts itself), heterogeneous ones to the
    uniform row.
    """
    v = aff.values
    sums = v.sum(axis=1)
    zero = sums <= 0.0
    out = np.empty_like(v)
    nz = ~zero
    out[nz] = v[nz] / sums[nz, None]
    if zero.any():
        for i in np.flatnonzero(zero):
            if aff.kind.homogeneous:
                out[i] = 0.0
                out[i, i] = 1.0
            else:
                out[i] = 1.0 / v.shape[1]
    return AffinityMatrix(out, aff.kind)


def homogeneous_affinity(features, kappa: int, kind: AffinityKind) -> AffinityMatrix:
    """Row-normalized Jaccard affinity of mutual k-reciprocal sets."""
    return row_normalize(jaccard_affinity(k_reciprocal_sets(features, kappa), kind))
