"""Exact one-dimensional k-means with AIC model selection and silhouette scoring.

Values are contact frequencies sorted in descending order. In one dimension
an optimal k-means partition is a set of contiguous runs of the sorted
sequence, so the global optimum is found by dynamic programming over cut
positions rather than by Lloyd iterations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import NamedTuple, Optional, Sequence

import numpy as np

# Above this many points the (n+1) x (n+1) cost matrix is built in row blocks.
_FULL_MATRIX_MAX = 1500
_BLOCK_CELLS = 1 << 22

AIC_FLOOR = 1e-12
CRITERIA = ("mixture", "spherical")


@dataclass(frozen=True)
class ClusterConfig:
    """One k-means partition of a descending-sorted value sequence.

    ``boundaries`` holds the k-1 start indices of clusters 2..k, so cluster i
    spans ``values[starts[i]:starts[i+1]]``. Cluster 0 holds the largest values.
    """

    k: int
    boundaries: tuple
    centroids: tuple
    sizes: tuple
    wcss: float
    ss_tot: float
    aic: float
    minima: tuple = ()
    mean_silhouette: Optional[float] = None

    @property
    def n(self) -> int:
        return int(sum(self.sizes))

    def segments(self) -> list:
        """(start, stop) index pairs for each cluster, innermost first."""
        edges = [0, *self.boundaries, self.n]
        return list(zip(edges[:-1], edges[1:]))

    def labels(self) -> np.ndarray:
        return np.repeat(np.arange(self.k), self.sizes)


class KRow(NamedTuple):
    k: int
    wcss: float
    var_exp: float
    aic: float


@dataclass(frozen=True)
class KStarResult:
    k_star: int
    per_k: tuple
    config: ClusterConfig
    criterion: str = "mixture"

    @property
    def mean_silhouette(self) -> Optional[float]:
        return self.config.mean_silhouette


def _as_sorted_values(values) -> np.ndarray:
    x = np.asarray(values, dtype=float)
    if x.ndim != 1:
        raise ValueError("values must be one-dimensional")
    if not np.all(np.isfinite(x)):
        raise ValueError("values must be finite")
    if x.size > 1 and np.any(np.diff(x) > 0):
        raise ValueError("values must be sorted in descending order")
    return x


def _direct_ss(x: np.ndarray) -> float:
    if x.size == 0:
        return 0.0
    d = x - x.mean()
    return float(np.dot(d, d))


def _var_exp(wcss: float, ss_tot: float) -> float:
    if ss_tot <= 0:
        return 1.0
    return min(1.0, max(0.0, (ss_tot - wcss) / ss_tot))


def aic_from_wcss(wcss: float, ss_tot: float, n: int, k: int) -> float:
    floor = AIC_FLOOR * ss_tot if ss_tot > 0 else AIC_FLOOR
    return n * math.log(max(wcss, floor) / n) + 2 * k


def _mixture_aic_batch(x, p1, p2, a, b, ks) -> np.ndarray:
    """Gaussian-mixture AIC of the contiguous partition for each k in ``ks``.

    ``ks`` must be consecutive integers and ``a``/``b`` list the cluster
    (start, stop) pairs of all those partitions back to back; p1/p2 are prefix
    sums of the centred values.

    Each cluster contributes a weight, mean and variance (3k - 1 free
    parameters). Degenerate variances fall back to the gap to the nearest
    value outside the cluster: dmin**2 for singletons, (dmin / 6)**2 for
    runs of identical values. A partition that still ends up with a zero
    variance (identical values split across clusters) scores +inf; a
    constant sample at k = 1 is a point mass with log-likelihood 0.
    """
    n = x.size
    m = (b - a).astype(float)
    s1 = p1[b] - p1[a]
    ss = np.maximum(p2[b] - p2[a] - s1 * s1 / m, 0.0)
    mu = x.mean() + s1 / m
    constant = x[a] == x[b - 1]
    var = np.where(constant, 0.0, ss / np.maximum(m - 1.0, 1.0))
    mu = np.where(constant, x[a], mu)
    up = np.where(a > 0, x[np.maximum(a - 1, 0)] - x[a], np.inf)
    down = np.where(b < n, x[b - 1] - x[np.minimum(b, n - 1)], np.inf)
    dmin = np.minimum(up, down)
    fallback = np.where(m == 1, dmin * dmin, dmin * dmin / 36.0)
    var = np.where(constant, fallback, var)
    k_of = np.repeat(ks, ks)
    bad = np.zeros(ks.size, dtype=bool)
    np.logical_or.at(bad, k_of - ks[0], var == 0.0)
    lone = ~np.isfinite(var)  # constant sample at k = 1 has no neighbour gap
    var = np.where(lone | (var == 0.0), 1.0, var)
    with np.errstate(divide="ignore"):
        log_dens = (
            np.log(m / n)[None, :]
            - 0.5 * np.log(2.0 * math.pi * var)[None, :]
            - (x[:, None] - mu[None, :]) ** 2 / (2.0 * var[None, :])
        )
    offsets = np.concatenate(([0], np.cumsum(ks)[:-1]))
    top = np.maximum.reduceat(log_dens, offsets, axis=1)
    expanded = np.repeat(top, ks, axis=1)
    lse = top + np.log(np.add.reduceat(np.exp(log_dens - expanded), offsets, axis=1))
    out = -2.0 * lse.sum(axis=0) + 2.0 * (3 * ks - 1)
    out = np.where(bad, np.inf, out)
    lone_k = np.zeros(ks.size, dtype=bool)
    np.logical_or.at(lone_k, k_of - ks[0], lone)
    return np.where(lone_k, 2.0 * (3 * ks - 1), out)


class KMeansTable:
    """Dynamic-programming tables for every k up to ``k_max``.

    ``suffix[k-1, i]`` is the optimal within-cluster sum of squares for
    splitting ``values[i:]`` into exactly k clusters (``inf`` if infeasible).
    Working on suffixes lets reconstruction take the smallest admissible
    cut at every step, which yields the lexicographically smallest boundary
    vector among equal-cost optima.
    """

    def __init__(self, values, k_max: int):
        x = _as_sorted_values(values)
        if x.size == 0:
            raise ValueError("values must be non-empty")
        if k_max < 1:
            raise ValueError("k_max must be >= 1")
        self.values = x
        self.n = x.size
        self.k_max = min(k_max, self.n)
        # centring keeps the prefix-sum cost formula well conditioned
        c = x - x.mean()
        self._p1 = np.concatenate(([0.0], np.cumsum(c)))
        self._p2 = np.concatenate(([0.0], np.cumsum(c * c)))
        self.ss_tot = _direct_ss(x)
        self.suffix, self._cut = self._fill()
        self._bounds = {}

    def _cost_rows(self, i0: int, i1: int) -> np.ndarray:
        """Segment costs for starts i0..i1-1 against every stop 0..n."""
        i = np.arange(i0, i1)[:, None]
        j = np.arange(self.n + 1)[None, :]
        m = j - i
        s = self._p1[j] - self._p1[i]
        with np.errstate(divide="ignore", invalid="ignore"):
            cost = (self._p2[j] - self._p2[i]) - s * s / m
        cost = np.maximum(cost, 0.0)
        cost[m <= 0] = np.inf
        return cost

    def _fill(self):
        n, kmax = self.n, self.k_max
        out = np.empty((kmax, n + 1))
        # cut[k, i]: end of the first cluster when values[i:] holds k+1 clusters;
        # argmin returns the first minimum, i.e. the smallest cut
        cut = np.full((kmax, n + 1), n, dtype=np.int64)
        if n <= _FULL_MATRIX_MAX:
            full = self._cost_rows(0, n + 1)
            rows = np.arange(n + 1)
            out[0] = full[:, n]
            for k in range(1, kmax):
                total = full + out[k - 1][None, :]
                cut[k] = total.argmin(axis=1)
                out[k] = total[rows, cut[k]]
            return out, cut
        step = max(1, _BLOCK_CELLS // (n + 1))
        for k in range(kmax):
            for i0 in range(0, n + 1, step):
                i1 = min(n + 1, i0 + step)
                block = self._cost_rows(i0, i1)
                if k == 0:
                    out[0, i0:i1] = block[:, n]
                else:
                    total = block + out[k - 1][None, :]
                    cut[k, i0:i1] = total.argmin(axis=1)
                    out[k, i0:i1] = total[np.arange(i1 - i0), cut[k, i0:i1]]
        return out, cut

    def wcss(self, k: int) -> float:
        return float(self.suffix[k - 1, 0])

    def boundaries(self, k: int) -> tuple:
        if not 1 <= k <= self.k_max:
            raise ValueError(f"k={k} outside 1..{self.k_max}")
        cached = self._bounds.get(k)
        if cached is None:
            cuts = []
            i = 0
            for stage in range(k - 1, 0, -1):
                i = int(self._cut[stage, i])
                cuts.append(i)
            cached = self._bounds[k] = tuple(cuts)
        return cached

    def partition(self, k: int) -> tuple:
        """Boundaries, centroids, sizes and directly summed WCSS for k clusters."""
        bounds = self.boundaries(k)
        if k == 1:
            return bounds, (float(self.values.mean()),), (self.n,), self.ss_tot
        starts = np.array((0, *bounds))
        counts = np.diff(np.append(starts, self.n))
        means = np.add.reduceat(self.values, starts) / counts
        dev = self.values - np.repeat(means, counts)
        wcss = float(np.add.reduceat(dev * dev, starts).sum())
        return bounds, tuple(means.tolist()), tuple(counts.tolist()), wcss

    def score(self, k: int, criterion: str = "mixture") -> float:
        return float(self.scores(criterion, np.array([k]))[0])

    def scores(self, criterion: str = "mixture", ks=None) -> np.ndarray:
        """Selection score for each k in ``ks`` (default 1..k_max, consecutive)."""
        if ks is None:
            ks = np.arange(1, self.k_max + 1)
        if criterion == "spherical":
            return np.array([aic_from_wcss(self.wcss(k), self.ss_tot, self.n, k) for k in ks])
        if criterion != "mixture":
            raise ValueError(f"unknown criterion {criterion!r}")
        if self.n == 1:
            # a single value is a point mass at k = 1, the only admissible k
            return 2.0 * (3 * np.asarray(ks) - 1.0)
        # every cluster of every candidate k, flattened into one component list
        starts, stops = [], []
        for k in ks:
            edges = [0, *self.boundaries(k), self.n]
            starts.extend(edges[:-1])
            stops.extend(edges[1:])
        a = np.asarray(starts)
        b = np.asarray(stops)
        return _mixture_aic_batch(self.values, self._p1, self._p2, a, b, ks)

    def config(
        self, k: int, silhouette: bool = True, criterion: str = "mixture", aic: Optional[float] = None
    ) -> ClusterConfig:
        bounds, centroids, sizes, wcss = self.partition(k)
        if aic is None:
            aic = aic_from_wcss(wcss, self.ss_tot, self.n, k) if criterion == "spherical" else self.score(k, criterion)
        cfg = ClusterConfig(
            k=k,
            boundaries=bounds,
            centroids=centroids,
            sizes=sizes,
            wcss=wcss,
            ss_tot=self.ss_tot,
            aic=aic,
            minima=tuple(float(self.values[b - 1]) for b in [*bounds, self.n]),
        )
        if silhouette and k >= 2:
            cfg = replace(cfg, mean_silhouette=silhouette_mean(self.values, cfg))
        return cfg

    def per_k(self, k_max: Optional[int] = None, criterion: str = "mixture") -> tuple:
        top = self.k_max if k_max is None else min(k_max, self.k_max)
        aics = self.scores(criterion, np.arange(1, top + 1))
        rows = []
        for k, aic in enumerate(aics.tolist(), start=1):
            w = self.wcss(k)
            rows.append(KRow(k, w, _var_exp(w, self.ss_tot), aic))
        return tuple(rows)

    def select(self, k_max: Optional[int] = None, criterion: str = "mixture") -> KStarResult:
        rows = self.per_k(k_max, criterion)
        aics = np.array([r.aic for r in rows])
        k_star = int(np.argmin(aics)) + 1  # first minimum: ties go to smaller k
        return KStarResult(
            k_star=k_star,
            per_k=rows,
            config=self.config(k_star, criterion=criterion, aic=float(aics[k_star - 1])),
            criterion=criterion,
        )


def kmeans_1d(values: Sequence[float], k: int) -> ClusterConfig:
    """Globally optimal k-means partition of descending-sorted ``values``."""
    if k <= 0:
        raise ValueError("k must be positive")
    n = len(values)
    if k > n:
        raise ValueError(f"k={k} exceeds number of values n={n}")
    return KMeansTable(values, k).config(k)


def variance_explained(config: ClusterConfig) -> float:
    return _var_exp(config.wcss, config.ss_tot)


def aic_score(config: ClusterConfig, n: Optional[int] = None) -> float:
    """Shared-variance spherical AIC, n * ln(WCSS / n) + 2k.

    WCSS is floored at 1e-12 * SS_TOT so perfect fits stay finite. This is
    the ``criterion="spherical"`` score; ``select_k`` defaults to the mixture
    criterion because this one keeps decreasing with k on continuous data.
    """
    if n is None:
        n = config.n
    if n < 1:
        raise ValueError("n must be >= 1")
    return aic_from_wcss(config.wcss, config.ss_tot, n, config.k)


def mixture_aic(values: Sequence[float], config: ClusterConfig) -> float:
    """Gaussian-mixture AIC of ``config`` over the values it partitions."""
    x = _as_sorted_values(values)
    if x.size != config.n:
        raise ValueError("config does not partition these values")
    c = x - x.mean()
    p1 = np.concatenate(([0.0], np.cumsum(c)))
    p2 = np.concatenate(([0.0], np.cumsum(c * c)))
    seg = np.asarray(config.segments())
    return float(_mixture_aic_batch(x, p1, p2, seg[:, 0], seg[:, 1], np.array([config.k]))[0])


def select_k(values: Sequence[float], k_max: int = 20, criterion: str = "mixture") -> KStarResult:
    """Scan k = 1..min(k_max, n) and keep the AIC minimiser (smaller k on ties)."""
    if len(values) == 0:
        raise ValueError("cannot select k for an empty value list")
    if criterion not in CRITERIA:
        raise ValueError(f"unknown criterion {criterion!r}")
    return KMeansTable(values, k_max).select(criterion=criterion)


def silhouette_mean(values: Sequence[float], config: ClusterConfig) -> Optional[float]:
    """Mean silhouette of a contiguous partition; ``None`` when k == 1.

    Uses s(x) = (b - a) / max(a, b), so +1 means well separated. Members of
    singleton clusters score 0.
    """
    if config.k < 2:
        return None
    x = np.asarray(values, dtype=float)
    # sums[p, c] = total |x_p - y| over y in cluster c
    sums = np.empty((x.size, config.k))
    for c, (a, b) in enumerate(config.segments()):
        sums[:, c] = np.abs(x[:, None] - x[None, a:b]).sum(axis=1)
    sizes = np.asarray(config.sizes, dtype=float)
    labels = config.labels()
    idx = np.arange(x.size)
    own = sizes[labels]
    with np.errstate(divide="ignore", invalid="ignore"):
        a_x = sums[idx, labels] / (own - 1)
        means = sums / sizes[None, :]
    means[idx, labels] = np.inf
    b_x = means.min(axis=1)
    denom = np.maximum(a_x, b_x)
    with np.errstate(divide="ignore", invalid="ignore"):
        s = np.where(denom > 0, (b_x - a_x) / denom, 0.0)
    s[own == 1] = 0.0
    return float(s.mean())
