"""Embedding clustering quality for the multi-view identity study."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.manifold import TSNE

from ..errors import ConfigurationError, DegenerateLabelError, DimensionError


@dataclass(frozen=True)
class ClusteringResult:
    silhouette: float
    projection: np.ndarray  # (N, 2) for plotting; the metric ignores it
    labels: np.ndarray


def mean_silhouette(embeddings: np.ndarray, labels: np.ndarray) -> float:
    """Mean silhouette coefficient with Euclidean distances."""
    distances = np.linalg.norm(embeddings[:, None, :] - embeddings[None, :, :],
                               axis=2)
    n = len(labels)
    unique = np.unique(labels)
    members = {lab: np.nonzero(labels == lab)[0] for lab in unique}
    scores = np.zeros(n)
    for i in range(n):
        own = members[labels[i]]
        a = distances[i, own[own != i]].mean()
        b = min(distances[i, members[lab]].mean()
                for lab in unique if lab != labels[i])
        denom = max(a, b)
        scores[i] = 0.0 if denom == 0.0 else (b - a) / denom
    return float(scores.mean())


def project_2d(embeddings: np.ndarray, seed: int = 0) -> np.ndarray:
    """Deterministic seeded neighbor embedding for plotting."""
    n = len(embeddings)
    perplexity = min(30.0, max(2.0, (n - 1) / 3.0))
    tsne = TSNE(n_components=2, perplexity=perplexity, init="pca",
                random_state=seed, n_jobs=1)
    return tsne.fit_transform(np.asarray(embeddings, dtype=np.float64))


def clustering_quality(embeddings, object_labels, projection_seed: int = 0) -> ClusteringResult:
    """Silhouette of the embeddings under ground-truth object labels.

    The silhouette is computed in the original embedding space; the 2-D
    projection is only for plotting.
    """
    embeddings = np.asarray(embeddings, dtype=np.float64)
    labels = np.asarray(object_labels)
    if embeddings.ndim != 2:
        raise DimensionError(f"embeddings must be (N, d), got {embeddings.shape}")
    if labels.shape != (len(embeddings),):
        raise DimensionError("one label per embedding required")
    unique, counts = np.unique(labels, return_counts=True)
    if len(unique) < 2:
        raise ConfigurationError("clustering needs at least two objects")
    thin = unique[counts < 2]
    if thin.size:
        raise DegenerateLabelError(
            f"labels with a single member: {[str(t) for t in thin]}")
    return ClusteringResult(
        silhouette=mean_silhouette(embeddings, labels),
        projection=project_2d(embeddings, seed=projection_seed),
        labels=labels.copy(),
    )


def write_projection(path, labels, points) -> None:
    """Point list (label, x, y) for external plotting."""
    points = np.asarray(points, dtype=np.float64)
    if points.shape != (len(labels), 2):
        raise DimensionError("points must be (N, 2) matching labels")
    lines = [f"{lab}\t{x:.8g}\t{y:.8g}" for lab, (x, y) in zip(labels, points)]
    with open(path, "w") as fh:
        fh.write("label\tx\ty\n" + "\n".join(lines) + "\n")
