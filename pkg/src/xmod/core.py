"""Core value types, configuration, and shared numeric helpers.

Everything downstream works on L2-normalized float64 feature rows and
row-stochastic soft label matrices. The types here are thin immutable
wrappers whose constructors enforce those invariants once, so the math
modules can assume them.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from enum import Enum

import numpy as np

# Sentinel for instances DBSCAN leaves unclustered. Kept negative so it can
# never collide with a cluster id.
NOISE = -1

# Row norms below this are treated as zero vectors.
_ZERO_NORM = 1e-12

# Tolerance for "already normalized" checks on ingestion.
_UNIT_TOL = 1e-6


class Modality(Enum):
    VISIBLE = "visible"
    INFRARED = "infrared"


class XmodError(Exception):
    """Base class for all data and numeric errors raised by this package."""


class ZeroRowError(XmodError):
    def __init__(self, row: int):
        self.row = int(row)
        super().__init__(f"row {self.row} has (near-)zero L2 norm")


class NonFiniteError(XmodError):
    def __init__(self, where: str, row: int = -1, col: int = -1):
        self.row, self.col = int(row), int(col)
        loc = f" at ({self.row}, {self.col})" if row >= 0 else ""
        super().__init__(f"non-finite value in {where}{loc}")


class ShapeMismatchError(XmodError):
    pass


class EmptyClusterError(XmodError):
    def __init__(self, cluster: int):
        self.cluster = int(cluster)
        super().__init__(f"cluster {self.cluster} has no members")


class LabelOutOfRangeError(XmodError):
    pass


class ModeMismatchError(XmodError):
    pass


class InfeasibleSeparationError(XmodError):
    pass


class MissingSnapshotError(XmodError):
    def __init__(self, epoch: int, detail: str = ""):
        self.epoch = int(epoch)
        msg = f"incomplete or missing snapshot pair for epoch {self.epoch}"
        super().__init__(msg + (f": {detail}" if detail else ""))


class FileFormatError(XmodError):
    pass


class NotConvergedWarning(RuntimeWarning):
    """Sinkhorn hit its iteration cap with the marginal error still large."""


def _first_bad(m: np.ndarray) -> tuple[int, int]:
    i, j = np.argwhere(~np.isfinite(m))[0]
    return int(i), int(j)


def l2_normalize_rows(m) -> np.ndarray:
    """Return a float64 copy of ``m`` with unit-L2 rows.

    Raises ZeroRowError for rows with norm < 1e-12 and NonFiniteError if any
    entry is NaN/inf. Idempotent up to float rounding.
    """
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] == 0 or m.shape[1] == 0:
        raise ShapeMismatchError(f"expected a nonempty 2-d matrix, got shape {m.shape}")
    if not np.isfinite(m).all():
        i, j = _first_bad(m)
        raise NonFiniteError("feature matrix", i, j)
    norms = np.linalg.norm(m, axis=1)
    small = norms < _ZERO_NORM
    if small.any():
        raise ZeroRowError(np.flatnonzero(small)[0])
    return m / norms[:, None]


def pairwise_sq_dists(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Squared Euclidean distances between rows of ``a`` and rows of ``b``."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[1]:
        raise ShapeMismatchError(f"incompatible shapes {a.shape} and {b.shape}")
    sq = (a * a).sum(axis=1)[:, None] + (b * b).sum(axis=1)[None, :] - 2.0 * (a @ b.T)
    # Gram-trick rounding can leave tiny negatives on near-duplicate rows.
    np.maximum(sq, 0.0, out=sq)
    return sq


@dataclass(frozen=True)
class FeatureMatrix:
    """N x d float64 matrix with unit-L2 rows, tagged with its modality."""

    data: np.ndarray
    modality: Modality

    def __post_init__(self):
        d = np.asarray(self.data, dtype=np.float64)
        if d.ndim != 2 or d.shape[0] == 0:
            raise ShapeMismatchError(f"feature matrix must be nonempty 2-d, got {d.shape}")
        if not np.isfinite(d).all():
            i, j = _first_bad(d)
            raise NonFiniteError("feature matrix", i, j)
        norms = np.linalg.norm(d, axis=1)
        if not np.allclose(norms, 1.0, atol=_UNIT_TOL):
            raise ShapeMismatchError("feature rows are not unit-normalized")
        object.__setattr__(self, "data", d)

    @classmethod
    def from_raw(cls, raw, modality: Modality) -> "FeatureMatrix":
        return cls(l2_normalize_rows(raw), modality)

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def dim(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class SoftLabelMatrix:
    """N x K row-stochastic matrix of per-instance label distributions."""

    probs: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=np.float64)
        if p.ndim != 2 or p.shape[0] == 0 or p.shape[1] == 0:
            raise ShapeMismatchError(f"label matrix must be nonempty 2-d, got {p.shape}")
        if not np.isfinite(p).all():
            i, j = _first_bad(p)
            raise NonFiniteError("label matrix", i, j)
        if p.min() < -1e-9 or p.max() > 1.0 + 1e-9:
            raise LabelOutOfRangeError("label entries outside [0, 1]")
        rows = p.sum(axis=1)
        if not np.allclose(rows, 1.0, atol=1e-6):
            bad = int(np.argmax(np.abs(rows - 1.0)))
            raise LabelOutOfRangeError(
                f"label row {bad} sums to {rows[bad]:.9f}, expected 1"
            )
        object.__setattr__(self, "probs", p)

    @classmethod
    def one_hot(cls, labels: np.ndarray, k: int) -> "SoftLabelMatrix":
        labels = np.asarray(labels)
        if labels.min() < 0 or labels.max() >= k:
            raise LabelOutOfRangeError("hard labels outside [0, k)")
        p = np.zeros((labels.shape[0], k), dtype=np.float64)
        p[np.arange(labels.shape[0]), labels] = 1.0
        return cls(p)

    @property
    def n(self) -> int:
        return self.probs.shape[0]

    @property
    def space_size(self) -> int:
        return self.probs.shape[1]


def hard_from_soft(y) -> np.ndarray:
    """Argmax per row, ties broken toward the lowest index."""
    p = y.probs if isinstance(y, SoftLabelMatrix) else np.asarray(y, dtype=np.float64)
    if p.ndim != 2:
        raise ShapeMismatchError("expected a 2-d label matrix")
    return np.argmax(p, axis=1).astype(np.int64)


@dataclass(frozen=True)
class PipelineConfig:
    """Engine-wide knobs. Defaults are the operating point used throughout."""

    tau: float = 0.05              # memory softmax temperature
    mu: float = 0.1                # memory momentum
    kappa: int = 30                # k-reciprocal neighborhood size
    ot_lambda: float = 25.0        # entropic OT weight
    alpha: float = 0.2             # init-anchor weight in the transfer updates
    beta: float = 0.7              # hard-label share in label fusion
    dbscan_eps: float = 0.6
    dbscan_min_samples: int = 4
    epsilon0: float = 1e-2         # transfer convergence threshold
    max_transfer_iters: int = 100
    sharpen_divisor: float = 5.0   # target-temperature divisor in the refinement loss
    batch_size: int = 144          # 12 identities x 12 instances
    seed: int = 0

    def __post_init__(self):
        if not (0.0 < self.tau):
            raise ValueError("tau must be positive")
        if not (0.0 <= self.mu <= 1.0):
            raise ValueError("mu must lie in [0, 1]")
        if self.kappa < 1:
            raise ValueError("kappa must be >= 1")
        if self.ot_lambda <= 0.0:
            raise ValueError("ot_lambda must be positive")
        if not (0.0 <= self.alpha <= 1.0):
            raise ValueError("alpha must lie in [0, 1]")
        if not (0.0 <= self.beta <= 1.0):
            raise ValueError("beta must lie in [0, 1]")
        if self.dbscan_eps <= 0.0 or self.dbscan_min_samples < 1:
            raise ValueError("bad clustering parameters")
        if self.epsilon0 <= 0.0 or self.max_transfer_iters < 1:
            raise ValueError("bad transfer loop parameters")
        if self.sharpen_divisor <= 0.0:
            raise ValueError("sharpen_divisor must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")

    def with_overrides(self, overrides: dict) -> "PipelineConfig":
        """Apply a {field: value} dict, accepting "lambda" for ot_lambda."""
        clean = {}
        names = {f.name for f in dataclasses.fields(self)}
        for key, value in overrides.items():
            name = "ot_lambda" if key == "lambda" else key
            if name not in names:
                raise ValueError(f"unknown config field {key!r}")
            clean[name] = value
        return dataclasses.replace(self, **clean)
