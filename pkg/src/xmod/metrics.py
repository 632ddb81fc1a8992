"""Pairwise label-quality metrics against identity ground truth.

All metrics are over instance pairs. Accuracy asks: of the pairs that share
a ground-truth identity, how many share a predicted label? Recall flips the
denominator to the pairs sharing a predicted label. NOISE predictions never
match anything, but the instances still count in denominators. A metric
whose denominator is empty is undefined (None).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import NOISE, ShapeMismatchError
from .transfer import AssociationResult


@dataclass(frozen=True)
class GroundTruth:
    """Per-instance identity ids for each modality."""

    ids_v: np.ndarray
    ids_r: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.ids_v, dtype=np.int64)
        r = np.asarray(self.ids_r, dtype=np.int64)
        if v.ndim != 1 or r.ndim != 1 or v.size == 0 or r.size == 0:
            raise ShapeMismatchError("ground-truth id vectors must be nonempty 1-d")
        object.__setattr__(self, "ids_v", v)
        object.__setattr__(self, "ids_r", r)


@dataclass(frozen=True)
class MetricsReport:
    intra_acc_v: float | None
    intra_acc_r: float | None
    cross_acc_v: float | None
    cross_acc_r: float | None
    intra_re_v: float | None
    intra_re_r: float | None
    cross_re_v: float | None
    cross_re_r: float | None

    NAMES = (
        "intra_acc_v",
        "intra_acc_r",
        "cross_acc_v",
        "cross_acc_r",
        "intra_re_v",
        "intra_re_r",
        "cross_re_v",
        "cross_re_r",
    )

    def to_dict(self) -> dict:
        return {name: getattr(self, name) for name in self.NAMES}


def _pair_counts(pred_a, pred_b, gt_a, gt_b, include_self: bool):
    pa = np.asarray(pred_a, dtype=np.int64)
    pb = np.asarray(pred_b, dtype=np.int64)
    ga = np.asarray(gt_a, dtype=np.int64)
    gb = np.asarray(gt_b, dtype=np.int64)
    if pa.shape != ga.shape or pb.shape != gb.shape:
        raise ShapeMismatchError("prediction and ground-truth lengths differ")
    pred_match = (pa[:, None] == pb[None, :]) & (pa[:, None] != NOISE) & (pb[None, :] != NOISE)
    gt_match = ga[:, None] == gb[None, :]
    if not include_self:
        if pa.shape != pb.shape:
            raise ShapeMismatchError("self pairs only exist between equal-length sides")
        np.fill_diagonal(pred_match, False)
        np.fill_diagonal(gt_match, False)
    hits = int((pred_match & gt_match).sum())
    return hits, int(gt_match.sum()), int(pred_match.sum())


def pair_accuracy(pred_a, pred_b, gt_a, gt_b, include_self: bool = True) -> float | None:
    """Fraction of same-identity pairs that received the same label."""
    hits, gt_pairs, _ = _pair_counts(pred_a, pred_b, gt_a, gt_b, include_self)
    return hits / gt_pairs if gt_pairs else None


def pair_recall(pred_a, pred_b, gt_a, gt_b, include_self: bool = True) -> float | None:
    """Fraction of same-label pairs that are truly the same identity."""
    hits, _, pred_pairs = _pair_counts(pred_a, pred_b, gt_a, gt_b, include_self)
    return hits / pred_pairs if pred_pairs else None


def report_from_hard(
    intra_v: np.ndarray,
    cross_r: np.ndarray,
    intra_r: np.ndarray,
    cross_v: np.ndarray,
    gt: GroundTruth,
    include_self: bool = True,
) -> MetricsReport:
    """Metrics from full-length hard label vectors (NOISE where unlabeled).

    Intra metrics pair each modality's cross-space labels with themselves;
    cross metrics pair one modality's intra labels with the other's cross
    labels, which share a cluster space by construction.
    """
    if intra_v.shape != cross_v.shape or intra_r.shape != cross_r.shape:
        raise ShapeMismatchError("per-modality label vectors must have equal length")
    return MetricsReport(
        intra_acc_v=pair_accuracy(cross_v, cross_v, gt.ids_v, gt.ids_v, include_self),
        intra_acc_r=pair_accuracy(cross_r, cross_r, gt.ids_r, gt.ids_r, include_self),
        cross_acc_v=pair_accuracy(intra_v, cross_r, gt.ids_v, gt.ids_r),
        cross_acc_r=pair_accuracy(cross_v, intra_r, gt.ids_v, gt.ids_r),
        intra_re_v=pair_recall(cross_v, cross_v, gt.ids_v, gt.ids_v, include_self),
        intra_re_r=pair_recall(cross_r, cross_r, gt.ids_r, gt.ids_r, include_self),
        cross_re_v=pair_recall(intra_v, cross_r, gt.ids_v, gt.ids_r),
        cross_re_r=pair_recall(cross_v, intra_r, gt.ids_v, gt.ids_r),
    )


def full_report(
    result: AssociationResult, gt: GroundTruth, include_self: bool = True
) -> MetricsReport:
    """Harden all four association outputs and score them against identities."""
    for name in ("intra_v", "cross_r", "intra_r", "cross_v"):
        if getattr(result, name) is None:
            raise ShapeMismatchError(f"full_report needs both directions; {name} missing")
    if gt.ids_v.shape[0] != result.n_visible or gt.ids_r.shape[0] != result.n_infrared:
        raise ShapeMismatchError("ground-truth sizes do not match the association")
    return report_from_hard(
        result.intra_v.hard_full(result.n_visible),
        result.cross_r.hard_full(result.n_infrared),
        result.intra_r.hard_full(result.n_infrared),
        result.cross_v.hard_full(result.n_visible),
        gt,
        include_self,
    )
