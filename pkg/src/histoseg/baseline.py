"""Weighted 1-D k-means over histogram bins, the comparison baseline.

Bins are treated as points at their centers carrying mass
``density * bin_width``.  Initialization is deterministic (weighted
quantiles), so a given histogram always clusters the same way; the random
machinery here is confined to :func:`random_partition_inertias`, an audit
helper that scores random contiguous partitions for local-optimality tests.
"""

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError


@dataclass(frozen=True)
class KMeansResult:
    """Converged clustering: sorted centroids, the midpoint thresholds
    between them, Lloyd iterations used, and the weighted within-cluster
    sum of squares."""

    centroids: np.ndarray
    thresholds: np.ndarray
    iterations: int
    inertia: float

    def __post_init__(self):
        cent = np.asarray(self.centroids, dtype=float)
        thr = np.asarray(self.thresholds, dtype=float)
        if cent.size < 2 or thr.size != cent.size - 1:
            raise InvalidArgumentError("need C >= 2 centroids and C-1 thresholds")
        if np.any(np.diff(cent) <= 0):
            raise InvalidArgumentError("centroids must be strictly increasing")
        if np.any(thr <= cent[:-1]) or np.any(thr >= cent[1:]):
            raise InvalidArgumentError("thresholds must interleave the centroids")
        cent.setflags(write=False)
        thr.setflags(write=False)
        object.__setattr__(self, "centroids", cent)
        object.__setattr__(self, "thresholds", thr)
        object.__setattr__(self, "iterations", int(self.iterations))
        object.__setattr__(self, "inertia", float(self.inertia))


def _assign(points, centroids):
    """Nearest-centroid labels with ties broken toward the lower index."""
    return np.argmin(np.abs(points[:, None] - centroids[None, :]), axis=1)


def _inertia(points, masses, centroids, labels):
    return float(np.sum(masses * (points - centroids[labels]) ** 2))


def _quantile_centroids(points, masses, n_clusters):
    """Initial centroids at the (j - 1/2)/C weighted quantiles, nudged to
    distinct positive-mass bins when a heavy bin swallows several quantiles."""
    cumulative = np.cumsum(masses)
    positive = np.flatnonzero(masses > 0)
    chosen = []
    previous = -1
    for j in range(1, n_clusters + 1):
        quantile = (j - 0.5) / n_clusters * cumulative[-1]
        index = int(np.searchsorted(cumulative, quantile, side="left"))
        index = min(index, points.size - 1)
        if index <= previous:
            later = positive[positive > previous]
            if later.size == 0:
                raise InvalidArgumentError(
                    "could not seed distinct centroids; too few occupied bins"
                )
            index = int(later[0])
        chosen.append(index)
        previous = index
    return points[np.array(chosen)]


def lloyd_iterations(hist, n_clusters):
    """Generator over Lloyd iterations: yields (centroids, inertia) after
    each assignment/update round.  ``kmeans_1d`` wraps this with the
    stopping rule; tests use it to watch the descent directly."""
    points = hist.centers
    masses = hist.densities * hist.bin_width
    if int((masses > 0).sum()) < n_clusters:
        raise InvalidArgumentError(
            f"need at least {n_clusters} bins with positive mass"
        )
    centroids = _quantile_centroids(points, masses, n_clusters)
    while True:
        labels = _assign(points, centroids)
        updated = centroids.copy()
        for k in range(n_clusters):
            member = labels == k
            cluster_mass = masses[member].sum()
            if cluster_mass > 0:
                updated[k] = np.dot(points[member], masses[member]) / cluster_mass
        movement = float(np.max(np.abs(updated - centroids)))
        centroids = updated
        yield centroids.copy(), _inertia(points, masses, centroids, _assign(points, centroids)), movement


def kmeans_1d(hist, n_clusters, max_iters=500, tol=1e-10, seed=None):
    """Cluster a histogram's bins into ``n_clusters`` groups by weighted
    Lloyd iterations and return centroids plus midpoint thresholds.

    Deterministic given the histogram and ``n_clusters``: centroids start
    at the weighted quantiles and ties go to the lower cluster.  ``seed``
    is accepted for interface parity with the random-partition audit
    helper and does not influence the clustering.
    """
    n_clusters = int(n_clusters)
    if n_clusters < 2:
        raise InvalidArgumentError(f"need at least 2 clusters, got {n_clusters}")
    iterations = 0
    centroids = None
    inertia = np.inf
    for centroids, inertia, movement in lloyd_iterations(hist, n_clusters):
        iterations += 1
        if movement < tol or iterations >= int(max_iters):
            break
    order = np.argsort(centroids)
    centroids = centroids[order]
    thresholds = 0.5 * (centroids[:-1] + centroids[1:])
    return KMeansResult(centroids, thresholds, iterations, inertia)


def random_partition_inertias(hist, n_clusters, n_partitions=100, seed=0):
    """Inertias of random contiguous bin partitions with mean centroids.

    Audit oracle: a converged k-means run should never score worse than any
    of these blind partitions.
    """
    points = hist.centers
    masses = hist.densities * hist.bin_width
    rng = np.random.default_rng(seed)
    occupied = np.flatnonzero(masses > 0)
    if occupied.size < n_clusters:
        raise InvalidArgumentError(
            f"need at least {n_clusters} bins with positive mass"
        )
    inertias = []
    for _ in range(int(n_partitions)):
        # Cut points chosen between occupied bins so every part has mass.
        cuts = rng.choice(np.arange(1, occupied.size), size=n_clusters - 1, replace=False)
        cuts.sort()
        boundaries = [0, *occupied[cuts], points.size]
        total = 0.0
        start = 0
        for end in boundaries[1:]:
            part = slice(start, end)
            part_mass = masses[part].sum()
            if part_mass > 0:
                centroid = np.dot(points[part], masses[part]) / part_mass
                total += float(np.sum(masses[part] * (points[part] - centroid) ** 2))
            start = end
        inertias.append(total)
    return np.array(inertias)
