"""Cross-modality pseudo-label association toolkit."""

from .core import (
    FeatureMatrix,
    Modality,
    NOISE,
    PipelineConfig,
    SoftLabelMatrix,
    XmodError,
    hard_from_soft,
    l2_normalize_rows,
)
from .clustering import ClusterAssignment, DistanceMetric, MemoryBank, centroids, dbscan
from .affinity import AffinityKind, AffinityMatrix, homogeneous_affinity
from .transport import TransportPlan, TransportProblem, heterogeneous_affinity, otla_init, sinkhorn
from .transfer import (
    AssociationResult,
    Direction,
    TransferState,
    fuse_labels,
    mult_associate,
    run_transfer,
)
from .losses import Batch, LossReport, ModeBanks, TrainingMode, loss_report, momentum_update
from .metrics import GroundTruth, MetricsReport, full_report, pair_accuracy, pair_recall
from .synth import GapMode, SplitMix64, SynthSpec, generate
from .baselines import associate_greedy_centroid, associate_otla_only
from .pipeline import EpochResult, run_epoch, run_trace

__version__ = "0.1.0"

__all__ = [
    "AffinityKind",
    "AffinityMatrix",
    "AssociationResult",
    "Batch",
    "ClusterAssignment",
    "Direction",
    "DistanceMetric",
    "EpochResult",
    "FeatureMatrix",
    "GapMode",
    "GroundTruth",
    "LossReport",
    "MemoryBank",
    "MetricsReport",
    "Modality",
    "ModeBanks",
    "NOISE",
    "PipelineConfig",
    "SoftLabelMatrix",
    "SplitMix64",
    "SynthSpec",
    "TrainingMode",
    "TransferState",
    "TransportPlan",
    "TransportProblem",
    "XmodError",
    "associate_greedy_centroid",
    "associate_otla_only",
    "centroids",
    "dbscan",
    "full_report",
    "fuse_labels",
    "generate",
    "hard_from_soft",
    "heterogeneous_affinity",
    "homogeneous_affinity",
    "l2_normalize_rows",
    "loss_report",
    "momentum_update",
    "mult_associate",
    "otla_init",
    "pair_accuracy",
    "pair_recall",
    "run_epoch",
    "run_trace",
    "run_transfer",
    "sinkhorn",
]
