"""Spatial partitioning of sites into blocks for the whitened MCMC updates."""
from __future__ import annotations

import numpy as np
from scipy.spatial.distance import cdist

from .errors import ConfigError

__all__ = ["knn_cluster"]


def knn_cluster(coords, n_clusters: int, seed: int = 0) -> list[np.ndarray]:
    """Partition sites into disjoint, exhaustive spatial clusters.

    Lloyd iterations from a seeded farthest-point initialization; empty
    clusters steal the point most distant from its current center, so every
    cluster is nonempty. Deterministic given the seed; fixed for a whole run.
    """
    coords = np.atleast_2d(np.asarray(coords, dtype=np.float64))
    d = coords.shape[0]
    if n_clusters > d:
        raise ConfigError(f"cannot form {n_clusters} clusters from {d} sites")
    if n_clusters == 1:
        return [np.arange(d, dtype=np.int64)]

    rng = np.random.default_rng(seed)
    centers = coords[[rng.integers(d)]]
    while centers.shape[0] < n_clusters:
        dist = cdist(coords, centers).min(axis=1)
        centers = np.vstack([centers, coords[np.argmax(dist)]])

    assign = np.zeros(d, dtype=np.int64)
    for _ in range(100):
        dist = cdist(coords, centers)
        new_assign = np.argmin(dist, axis=1)
        for j in range(n_clusters):
            if not np.any(new_assign == j):
                worst = np.argmax(dist[np.arange(d), new_assign])
                new_assign[worst] = j
        if np.array_equal(new_assign, assign):
            break
        assign = new_assign
        for j in range(n_clusters):
            centers[j] = coords[assign == j].mean(axis=0)

    return [np.nonzero(assign == j)[0].astype(np.int64) for j in range(n_clusters)]
