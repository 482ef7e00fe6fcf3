"""One-dimensional DBSCAN and the decreasing-eps calibration loop.

With sorted input, neighbour counts come from binary search and density
connectivity reduces to runs of consecutive core points, so no spatial
index is needed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InfeasibleTargetError

EPS_DECAY = 0.95


@dataclass(frozen=True)
class DensityClustering:
    eps: float
    clusters: tuple  # tuple of index tuples, highest-frequency cluster first
    noise: tuple
    exact: bool = True

    @property
    def achieved_k(self) -> int:
        return len(self.clusters)

    @property
    def sizes(self) -> list:
        return [len(c) for c in self.clusters]


def _descending(values) -> np.ndarray:
    x = np.asarray(values, dtype=float)
    if x.ndim != 1:
        raise ValueError("values must be one-dimensional")
    if x.size > 1 and np.any(np.diff(x) > 0):
        raise ValueError("values must be sorted in descending order")
    return x


def dbscan_1d(values, eps: float, min_pts: int = 2) -> DensityClustering:
    """DBSCAN on descending-sorted values.

    A point is core when at least ``min_pts`` points, itself included, lie
    within distance ``eps``. Border points reachable from two clusters join
    the higher-frequency one.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    if min_pts < 2:
        raise ValueError("min_pts must be >= 2")
    x = _descending(values)
    n = x.size
    if n == 0:
        return DensityClustering(eps=float(eps), clusters=(), noise=())
    asc = x[::-1]
    lo = np.searchsorted(asc, asc - eps, side="left")
    hi = np.searchsorted(asc, asc + eps, side="right")
    counts = (hi - lo)[::-1]
    core = counts >= min_pts

    label = np.full(n, -1, dtype=np.int64)
    core_idx = np.flatnonzero(core)
    if core_idx.size:
        # consecutive core points within eps share a cluster
        breaks = np.flatnonzero(x[core_idx[:-1]] - x[core_idx[1:]] > eps) + 1
        run_id = np.zeros(core_idx.size, dtype=np.int64)
        run_id[breaks] = 1
        label[core_idx] = np.cumsum(run_id)
        # border points: attach to the nearest core on the higher-frequency side
        # first, falling back to the lower side
        for p in np.flatnonzero(~core):
            left = core_idx[core_idx < p]
            if left.size and x[left[-1]] - x[p] <= eps:
                label[p] = label[left[-1]]
                continue
            right = core_idx[core_idx > p]
            if right.size and x[p] - x[right[0]] <= eps:
                label[p] = label[right[0]]

    n_clusters = int(label.max()) + 1 if n else 0
    clusters = tuple(tuple(int(i) for i in np.flatnonzero(label == c)) for c in range(n_clusters))
    noise = tuple(int(i) for i in np.flatnonzero(label < 0))
    return DensityClustering(eps=float(eps), clusters=clusters, noise=noise)


def calibrate_eps(values, target_k: int, min_pts: int = 2) -> DensityClustering:
    """Shrink eps geometrically from the value range until DBSCAN finds ``target_k`` clusters.

    Stops at the first eps reaching at least ``target_k`` clusters or once eps
    drops below the smallest positive gap. Returns the clustering whose
    cluster count is closest to the target (larger eps on ties); ``exact``
    records whether the target was hit.
    """
    x = _descending(values)
    n = x.size
    if target_k < 1:
        raise ValueError("target_k must be >= 1")
    if target_k > n // 2:
        raise InfeasibleTargetError(
            f"target_k={target_k} unreachable with {n} points and MinPts=2 (max {n // 2})"
        )
    gaps = -np.diff(x)
    positive = gaps[gaps > 0]
    min_gap = float(positive.min()) if positive.size else 0.0
    span = float(x[0] - x[-1])
    eps = span if span > 0 else 1.0

    best = None
    best_dist = None
    while True:
        dc = dbscan_1d(x, eps, min_pts)
        dist = abs(dc.achieved_k - target_k)
        if best is None or dist < best_dist:
            best, best_dist = dc, dist
        if dc.achieved_k >= target_k or eps < min_gap or min_gap == 0.0:
            break
        eps *= EPS_DECAY
    return DensityClustering(
        eps=best.eps, clusters=best.clusters, noise=best.noise, exact=best.achieved_k == target_k
    )
