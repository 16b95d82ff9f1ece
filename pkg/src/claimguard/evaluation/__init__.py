"""Evaluation machinery: detection metrics, split protocols, CMC, ablations."""

from .detection import (
    Detection,
    MatchCounts,
    PrCurve,
    PrPoint,
    iou,
    match_detections,
    pr_curve,
    precision_recall_at,
)
from .splits import SplitMode, SplitSpec, make_probe_gallery, make_split
from .retrieval import AblationConfig, AblationRow, CmcCurve, ablation_run, cmc
from .fixtures import FixtureSpec, PerturbationSpec, generate_fixture, simulate_detector
from .io import (
    DatasetImage,
    DatasetIndex,
    load_manifest,
    read_annotations,
    read_detections,
    write_cmc_csv,
    write_pr_curve_csv,
)

__all__ = [
    "AblationConfig",
    "AblationRow",
    "CmcCurve",
    "DatasetImage",
    "DatasetIndex",
    "Detection",
    "FixtureSpec",
    "MatchCounts",
    "PerturbationSpec",
    "PrCurve",
    "PrPoint",
    "SplitMode",
    "SplitSpec",
    "ablation_run",
    "cmc",
    "generate_fixture",
    "iou",
    "load_manifest",
    "make_probe_gallery",
    "make_split",
    "match_detections",
    "pr_curve",
    "precision_recall_at",
    "read_annotations",
    "read_detections",
    "simulate_detector",
    "write_cmc_csv",
    "write_pr_curve_csv",
]
