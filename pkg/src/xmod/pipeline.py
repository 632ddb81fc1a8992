"""Epoch-level orchestration: cluster, associate, score, and trace.

An epoch clusters both modalities, runs the transfer engine in both
directions, then computes the loss report for the epoch's training mode
(visible-based on even epochs, infrared-based on odd ones) and, when ground
truth is available, the metrics report.
"""
from __future__ import annotations

import io
import csv
import os
import re
from dataclasses import dataclass

import numpy as np

from .core import MissingSnapshotError, Modality, PipelineConfig
from .clustering import ClusterAssignment, centroids, dbscan
from .fileio import atomic_write_text, read_features
from .losses import Batch, LossReport, ModeBanks, TrainingMode, loss_report, mean_reports
from .metrics import GroundTruth, MetricsReport, full_report
from .transfer import AssociationResult, Direction, mult_associate

_SNAPSHOT_RE = re.compile(r"^epoch(\d{3})_(visible|infrared)\.mfv1$")


@dataclass(frozen=True)
class EpochResult:
    epoch: int
    mode: TrainingMode
    labels: AssociationResult
    losses: LossReport
    metrics: MetricsReport | None


def make_banks(
    mode: TrainingMode,
    features_v,
    features_r,
    assign_v: ClusterAssignment,
    assign_r: ClusterAssignment,
    cfg: PipelineConfig,
) -> ModeBanks:
    """Fresh banks for one epoch. The shared and intra-cross banks start as
    copies of the mode's source-modality prototypes."""
    intra_v = centroids(features_v, assign_v, cfg.tau, cfg.mu)
    intra_r = centroids(features_r, assign_r, cfg.tau, cfg.mu)
    source = intra_v if mode is TrainingMode.V_BASED else intra_r
    return ModeBanks(mode=mode, intra_v=intra_v, intra_r=intra_r,
                     shared=source, intra_cross=source)


def epoch_loss_report(
    result: AssociationResult, banks: ModeBanks, features_v, features_r, cfg: PipelineConfig
) -> LossReport:
    """One full pass in batches of cfg.batch_size, averaged evenly.

    Slot i pairs the i-th clustered visible instance with the i-th clustered
    infrared instance; the pass stops at the shorter modality.
    """
    idx_v = result.intra_v.indices
    idx_r = result.intra_r.indices
    n = min(idx_v.shape[0], idx_r.shape[0])
    fv = features_v.data[idx_v[:n]]
    fr = features_r.data[idx_r[:n]]
    lab = {
        "intra_v": result.intra_v.labels.probs[:n],
        "cross_v": result.cross_v.labels.probs[:n],
        "intra_r": result.intra_r.labels.probs[:n],
        "cross_r": result.cross_r.labels.probs[:n],
    }
    reports = []
    for start in range(0, n, cfg.batch_size):
        sl = slice(start, min(start + cfg.batch_size, n))
        batch = Batch(
            features_v=fv[sl],
            features_r=fr[sl],
            **{name: rows[sl] for name, rows in lab.items()},
        )
        reports.append(loss_report(batch, banks, cfg.tau, cfg.sharpen_divisor))
    return mean_reports(reports)


def run_epoch(
    features_v, features_r, epoch_index: int, cfg: PipelineConfig, gt: GroundTruth | None = None
) -> EpochResult:
    assign_v = dbscan(features_v, cfg.dbscan_eps, cfg.dbscan_min_samples, kappa=cfg.kappa)
    assign_r = dbscan(features_r, cfg.dbscan_eps, cfg.dbscan_min_samples, kappa=cfg.kappa)
    result = mult_associate(features_v, features_r, assign_v, assign_r, cfg, Direction.BOTH)
    mode = TrainingMode.V_BASED if epoch_index % 2 == 0 else TrainingMode.R_BASED
    banks = make_banks(mode, features_v, features_r, assign_v, assign_r, cfg)
    losses = epoch_loss_report(result, banks, features_v, features_r, cfg)
    metrics = full_report(result, gt) if gt is not None else None
    return EpochResult(epoch_index, mode, result, losses, metrics)


def discover_snapshots(snapshot_dir) -> list[tuple[int, str, str]]:
    """Find epochNNN_visible/infrared.mfv1 pairs, contiguous from 000."""
    found: dict[int, dict[str, str]] = {}
    for name in os.listdir(snapshot_dir):
        m = _SNAPSHOT_RE.match(name)
        if m:
            epoch, modality = int(m.group(1)), m.group(2)
            found.setdefault(epoch, {})[modality] = os.path.join(snapshot_dir, name)
    if not found:
        raise MissingSnapshotError(0, f"no epochNNN_*.mfv1 files in {snapshot_dir}")
    for epoch in range(max(found) + 1):
        pair = found.get(epoch, {})
        if "visible" not in pair or "infrared" not in pair:
            raise MissingSnapshotError(epoch)
    return [
        (epoch, found[epoch]["visible"], found[epoch]["infrared"])
        for epoch in sorted(found)
    ]


def _format_metric(value: float | None) -> str:
    return "" if value is None else repr(float(value))


def trace_csv_text(rows: list[tuple[int, MetricsReport]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(("epoch",) + MetricsReport.NAMES)
    for epoch, report in rows:
        writer.writerow(
            [epoch] + [_format_metric(getattr(report, n)) for n in MetricsReport.NAMES]
        )
    return buf.getvalue()


def run_trace(
    snapshot_dir, cfg: PipelineConfig, gt: GroundTruth, out_path=None
) -> list[tuple[int, MetricsReport]]:
    """Score every snapshot epoch; optionally write the trace CSV."""
    rows = []
    for epoch, path_v, path_r in discover_snapshots(snapshot_dir):
        fv = read_features(path_v, Modality.VISIBLE)
        fr = read_features(path_r, Modality.INFRARED)
        result = run_epoch(fv, fr, epoch, cfg, gt)
        rows.append((epoch, result.metrics))
    if out_path is not None:
        atomic_write_text(out_path, trace_csv_text(rows))
    return rows
