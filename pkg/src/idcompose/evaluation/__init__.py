"""Measurement protocol: cropping, similarity, Frechet realism, clustering."""

from .clustering import (
    ClusteringResult,
    clustering_quality,
    mean_silhouette,
    project_2d,
    write_projection,
)
from .crop import CROP_MARGIN, crop_to_object
from .features import (
    ClassTokenExtractor,
    FeatureStats,
    RandomConvExtractor,
    feature_stats,
    similarity_score,
)
from .fid import fid
from .report import EvalReport, evaluate_run, write_report

__all__ = [
    "CROP_MARGIN",
    "ClassTokenExtractor",
    "ClusteringResult",
    "EvalReport",
    "FeatureStats",
    "RandomConvExtractor",
    "clustering_quality",
    "crop_to_object",
    "evaluate_run",
    "feature_stats",
    "fid",
    "mean_silhouette",
    "project_2d",
    "similarity_score",
    "write_projection",
]
