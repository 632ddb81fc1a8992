"""Synthetic two-modality identity blobs on the unit sphere.

The generator is deliberately self-contained: a splitmix64 counter feeds
Box-Muller normals, so the same spec + seed reproduces the same bytes on
any platform (and the algorithm is simple enough to port for fixtures in
other languages). Draw order is fixed and documented in ``generate``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .core import (
    FeatureMatrix,
    InfeasibleSeparationError,
    Modality,
    l2_normalize_rows,
)
from .metrics import GroundTruth

_MASK = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB

# Candidate draws allowed per identity center before giving up.
_MAX_CENTER_TRIES = 1000


class GapMode(Enum):
    SHARED_OFFSET = "shared"     # one modality offset for every identity
    PER_ID_OFFSET = "per-id"     # an independent offset per identity


@dataclass(frozen=True)
class SynthSpec:
    num_ids: int
    per_id_v: int = 20
    per_id_r: int = 20
    dim: int = 32
    id_separation: float = 1.0   # min Euclidean distance between id centers
    blob_std: float = 0.05       # per-coordinate noise around the center
    modality_gap: float = 0.0    # norm of the infrared offset vector
    gap_mode: GapMode = GapMode.SHARED_OFFSET
    seed: int = 0

    def __post_init__(self):
        if self.num_ids < 1 or self.per_id_v < 1 or self.per_id_r < 1:
            raise ValueError("counts must be >= 1")
        if self.dim < 2:
            raise ValueError("dim must be >= 2")
        if self.id_separation < 0.0 or self.blob_std < 0.0 or self.modality_gap < 0.0:
            raise ValueError("scales must be nonnegative")
        if self.id_separation > 2.0:
            # Unit vectors are at most 2 apart; anything larger can never work.
            raise InfeasibleSeparationError(
                f"id_separation {self.id_separation} exceeds the sphere diameter"
            )


class SplitMix64:
    """splitmix64 counter RNG; uniform doubles use the top 53 bits."""

    def __init__(self, seed: int):
        self._state = seed & _MASK

    def next_u64(self) -> int:
        self._state = (self._state + _GAMMA) & _MASK
        z = self._state
        z = ((z ^ (z >> 30)) * _MIX1) & _MASK
        z = ((z ^ (z >> 27)) * _MIX2) & _MASK
        return z ^ (z >> 31)

    def uniform(self) -> float:
        return (self.next_u64() >> 11) * (2.0 ** -53)

    def normal(self) -> float:
        """Box-Muller, cosine branch only: two uniforms per normal."""
        u1 = self.uniform()
        while u1 <= 0.0:
            u1 = self.uniform()
        u2 = self.uniform()
        return math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)

    def normal_vector(self, dim: int) -> np.ndarray:
        return np.array([self.normal() for _ in range(dim)], dtype=np.float64)


def _unit(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v)


def _draw_centers(rng: SplitMix64, spec: SynthSpec) -> np.ndarray:
    centers: list[np.ndarray] = []
    for g in range(spec.num_ids):
        for _ in range(_MAX_CENTER_TRIES):
            candidate = _unit(rng.normal_vector(spec.dim))
            if all(
                np.linalg.norm(candidate - c) >= spec.id_separation for c in centers
            ):
                centers.append(candidate)
                break
        else:
            raise InfeasibleSeparationError(
                f"could not place center {g} of {spec.num_ids} in dim {spec.dim} "
                f"with separation {spec.id_separation} after {_MAX_CENTER_TRIES} tries"
            )
    return np.stack(centers)


def generate(spec: SynthSpec) -> tuple[FeatureMatrix, FeatureMatrix, GroundTruth]:
    """Draw the dataset. Fixed draw order: identity centers first (rejected
    candidates consume draws), then the gap offset(s), then visible noise
    in instance order, then infrared noise in instance order.

    Every instance is normalize(center [+ gap] + blob_std * noise). With
    blob_std = 0 and modality_gap = 0 the two modalities are bitwise equal.
    """
    rng = SplitMix64(spec.seed)
    centers = _draw_centers(rng, spec)

    n_offsets = 1 if spec.gap_mode is GapMode.SHARED_OFFSET else spec.num_ids
    offsets = np.stack(
        [spec.modality_gap * _unit(rng.normal_vector(spec.dim)) for _ in range(n_offsets)]
    )

    def blob(gap_row) -> np.ndarray:
        rows = []
        per_id = spec.per_id_v if gap_row is None else spec.per_id_r
        for g in range(spec.num_ids):
            base = centers[g] if gap_row is None else centers[g] + offsets[gap_row(g)]
            for _ in range(per_id):
                rows.append(base + spec.blob_std * rng.normal_vector(spec.dim))
        return l2_normalize_rows(np.stack(rows))

    visible = blob(None)
    infrared = blob((lambda g: 0) if spec.gap_mode is GapMode.SHARED_OFFSET else (lambda g: g))

    ids_v = np.repeat(np.arange(spec.num_ids, dtype=np.int64), spec.per_id_v)
    ids_r = np.repeat(np.arange(spec.num_ids, dtype=np.int64), spec.per_id_r)
    return (
        FeatureMatrix(visible, Modality.VISIBLE),
        FeatureMatrix(infrared, Modality.INFRARED),
        GroundTruth(ids_v, ids_r),
    )
