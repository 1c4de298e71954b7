"""Frechet distance between feature distributions."""

from __future__ import annotations

import numpy as np

from ..errors import DimensionError, NumericalError
from .features import FeatureStats

EIG_TOLERANCE = -1e-8


def _psd_root(matrix: np.ndarray, label: str) -> np.ndarray:
    """Symmetric square root via eigendecomposition; tiny negatives clipped."""
    values, vectors = np.linalg.eigh(matrix)
    lowest = float(values.min()) if values.size else 0.0
    if lowest < EIG_TOLERANCE:
        raise NumericalError(
            f"{label} is not positive semidefinite: min eigenvalue {lowest:.3e} "
            f"below tolerance {EIG_TOLERANCE:.0e}")
    values = np.clip(values, 0.0, None)
    return (vectors * np.sqrt(values)) @ vectors.T


def fid(a: FeatureStats, b: FeatureStats) -> float:
    """||mu_a - mu_b||^2 + Tr(S_a + S_b - 2 (S_a S_b)^(1/2)).

    The product root comes from R_a S_b R_a with R_a the symmetric root of
    S_a: that matrix is PSD and similar to S_a S_b, so its root has the same
    trace while staying inside symmetric eigendecompositions.
    """
    if a.mean.shape != b.mean.shape or a.cov.shape != b.cov.shape:
        raise DimensionError(
            f"feature dims differ: {a.mean.shape} vs {b.mean.shape}")
    diff = a.mean - b.mean
    root_a = _psd_root(a.cov, "covariance a")
    cross = _psd_root(root_a @ b.cov @ root_a, "covariance product")
    value = float(diff @ diff + np.trace(a.cov) + np.trace(b.cov)
                  - 2.0 * np.trace(cross))
    if value < -1e-6:
        raise NumericalError(f"frechet distance came out negative: {value:.3e}")
    # exact-zero distance can round slightly negative
    return max(value, 0.0)
