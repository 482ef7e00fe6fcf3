"""Nested layers from per-ego clusterings and their population aggregates.

Layer 0 is the innermost (highest-frequency) annulus; layer i is the union
of annuli 0..i.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .cluster import ClusterConfig, KStarResult

CCDF_MAX_POINTS = 512


@dataclass(frozen=True)
class LayerProfile:
    ego: Optional[int]
    k: int
    annulus_sizes: tuple
    cumulative_sizes: tuple
    min_freq: tuple
    ratios: tuple


def nest_clusters(config: ClusterConfig, ego: Optional[int] = None) -> LayerProfile:
    """Prefix-sum the clusters of ``config`` into concentric layers."""
    if len(config.minima) != config.k:
        raise ValueError("config carries no per-cluster minima")
    return nest_annuli(config.sizes, config.minima, ego)


def nest_annuli(sizes: Sequence[int], minima: Sequence[float], ego: Optional[int] = None) -> LayerProfile:
    """Layers from annulus sizes and annulus minimum frequencies, innermost first."""
    annuli = tuple(int(s) for s in sizes)
    cumulative = tuple(int(c) for c in np.cumsum(annuli))
    minima = tuple(float(m) for m in minima)
    if len(minima) != len(annuli):
        raise ValueError("need one minimum frequency per annulus")
    if any(a <= 0 for a in annuli):
        raise ValueError(f"layer sizes {cumulative} are not strictly increasing")
    if any(b >= a for a, b in zip(minima, minima[1:])):
        raise ValueError(f"layer minimum frequencies {minima} are not strictly decreasing")
    return LayerProfile(
        ego=ego,
        k=len(annuli),
        annulus_sizes=annuli,
        cumulative_sizes=cumulative,
        min_freq=minima,
        ratios=tuple(scaling_ratios(cumulative)),
    )


def scaling_ratios(profile) -> list:
    """Consecutive cumulative-size ratios; empty for fewer than two layers."""
    sizes = profile.cumulative_sizes if isinstance(profile, LayerProfile) else profile
    sizes = [float(s) for s in sizes]
    return [b / a for a, b in zip(sizes, sizes[1:])]


def ccdf(values) -> tuple:
    """Empirical P(X >= x) at each distinct value, as ``(xs, probs)`` arrays."""
    x = np.asarray(values, dtype=float).ravel()
    if x.size == 0:
        raise ValueError("ccdf of an empty sample")
    xs, counts = np.unique(x, return_counts=True)
    below = np.concatenate(([0], np.cumsum(counts)[:-1]))
    return xs, (x.size - below) / x.size


def thin_table(xs: np.ndarray, ps: np.ndarray, max_points: int = CCDF_MAX_POINTS) -> tuple:
    """Keep at most ``max_points`` rows, evenly spaced by rank, first and last included."""
    if xs.size <= max_points:
        return xs, ps
    idx = np.unique(np.round(np.linspace(0, xs.size - 1, max_points)).astype(int))
    return xs[idx], ps[idx]


class Moments:
    """Running count/mean/M2 per vector component; merges exactly like a single pass would."""

    def __init__(self, width: int):
        self.width = width
        self.count = 0
        self.mean = np.zeros(width)
        self.m2 = np.zeros(width)

    def add(self, vec) -> None:
        v = np.asarray(vec, dtype=float)
        if v.shape != (self.width,):
            raise ValueError(f"expected {self.width} components, got {v.shape}")
        self.count += 1
        delta = v - self.mean
        self.mean = self.mean + delta / self.count
        self.m2 = self.m2 + delta * (v - self.mean)

    def merge(self, other: "Moments") -> "Moments":
        if other.width != self.width:
            raise ValueError("cannot merge moments of different widths")
        out = Moments(self.width)
        n = self.count + other.count
        if n == 0:
            return out
        delta = other.mean - self.mean
        out.count = n
        out.mean = self.mean + delta * (other.count / n)
        out.m2 = self.m2 + other.m2 + delta * delta * (self.count * other.count / n)
        return out

    @property
    def sd(self) -> np.ndarray:
        if self.count < 2:
            return np.zeros(self.width)
        return np.sqrt(self.m2 / (self.count - 1))

    @property
    def se(self) -> np.ndarray:
        if self.count < 1:
            return np.zeros(self.width)
        return self.sd / math.sqrt(self.count)


@dataclass
class PopulationAccumulator:
    """Associative reduction over per-ego results at one fixed layer count ``k``."""

    k: int
    sizes: Moments = None
    min_freq: Moments = None
    kstar: Counter = field(default_factory=Counter)
    silhouette_sum: float = 0.0
    silhouette_n: int = 0
    skipped: int = 0
    dbscan_sizes: Moments = None
    dbscan_absdiff: Moments = None
    dbscan_inexact: int = 0
    dbscan_infeasible: int = 0

    def __post_init__(self):
        self.sizes = self.sizes or Moments(self.k)
        self.min_freq = self.min_freq or Moments(self.k)
        self.dbscan_sizes = self.dbscan_sizes or Moments(self.k)
        self.dbscan_absdiff = self.dbscan_absdiff or Moments(self.k)

    def add_profile(self, profile: LayerProfile) -> None:
        if profile.k != self.k:
            raise ValueError(f"profile has k={profile.k}, accumulator expects {self.k}")
        self.sizes.add(profile.cumulative_sizes)
        self.min_freq.add(profile.min_freq)

    def add_kstar(self, result: KStarResult) -> None:
        self.kstar[result.k_star] += 1
        if result.mean_silhouette is not None:
            self.silhouette_sum += result.mean_silhouette
            self.silhouette_n += 1

    def add_dbscan(self, kmeans_cumulative: Sequence[int], dbscan_annuli: Optional[Sequence[int]], exact: bool) -> None:
        """Record one ego's DBSCAN sizes; ``None`` annuli means the target was infeasible."""
        if dbscan_annuli is None:
            self.dbscan_infeasible += 1
            return
        if not exact:
            self.dbscan_inexact += 1
            return
        cum = np.cumsum(dbscan_annuli)
        self.dbscan_sizes.add(cum)
        self.dbscan_absdiff.add(np.abs(cum - np.asarray(kmeans_cumulative, dtype=float)))

    def merge(self, other: "PopulationAccumulator") -> "PopulationAccumulator":
        if other.k != self.k:
            raise ValueError("cannot merge accumulators with different k")
        return PopulationAccumulator(
            k=self.k,
            sizes=self.sizes.merge(other.sizes),
            min_freq=self.min_freq.merge(other.min_freq),
            kstar=self.kstar + other.kstar,
            silhouette_sum=self.silhouette_sum + other.silhouette_sum,
            silhouette_n=self.silhouette_n + other.silhouette_n,
            skipped=self.skipped + other.skipped,
            dbscan_sizes=self.dbscan_sizes.merge(other.dbscan_sizes),
            dbscan_absdiff=self.dbscan_absdiff.merge(other.dbscan_absdiff),
            dbscan_inexact=self.dbscan_inexact + other.dbscan_inexact,
            dbscan_infeasible=self.dbscan_infeasible + other.dbscan_infeasible,
        )


def _histogram_stats(hist: Mapping[int, int]) -> dict:
    m = sum(hist.values())
    if m == 0:
        return {"n": 0, "histogram": {}, "mean": None, "median": None, "mode": None}
    ks = sorted(hist)
    flat = np.repeat(ks, [hist[k] for k in ks])
    top = max(hist.values())
    return {
        "n": int(m),
        "histogram": {str(k): int(hist[k]) for k in ks},
        "mean": float(flat.mean()),
        "median": float(np.median(flat)),
        "mode": int(min(k for k in ks if hist[k] == top)),
    }


@dataclass(frozen=True)
class LayerStats:
    index: int
    mean_cumulative_size: float
    sd: float
    se: float
    mean_min_freq: float
    min_freq_sd: float
    min_freq_se: float


@dataclass(frozen=True)
class PopulationReport:
    k: int
    n_profiles: int
    n_skipped: int
    layers: tuple
    ratio_of_means: tuple
    kstar_distribution: dict
    mean_silhouette: Optional[float]
    n_silhouette: int
    dbscan: Optional[dict] = None
    ccdf: Optional[dict] = None
    filters: Optional[dict] = None

    @property
    def mean_cumulative_sizes(self) -> list:
        return [l.mean_cumulative_size for l in self.layers]

    @property
    def mean_min_freqs(self) -> list:
        return [l.mean_min_freq for l in self.layers]

    def to_dict(self, meta: Optional[dict] = None) -> dict:
        out = {
            "meta": dict(meta or {}),
            "filters": dict(self.filters or {}),
            "kstar_distribution": self.kstar_distribution,
            "silhouette": {"mean": self.mean_silhouette, "n": self.n_silhouette},
            "k": self.k,
            "egos_analyzed": self.n_profiles,
            "egos_skipped": self.n_skipped,
            "layers": [l.__dict__ for l in self.layers],
            "scaling_ratios": list(self.ratio_of_means),
        }
        if self.dbscan is not None:
            out["dbscan_layers"] = self.dbscan
        out["ccdf"] = self.ccdf or {}
        return out

    def csv_rows(self) -> list:
        header = ["layer", "mean_cumulative_size", "sd", "se", "mean_min_freq", "min_freq_sd", "min_freq_se"]
        dbs = self.dbscan["layers"] if self.dbscan else None
        if dbs:
            header += ["dbscan_mean_size", "dbscan_sd", "dbscan_se", "dbscan_mean_abs_diff"]
        rows = [header]
        for i, l in enumerate(self.layers):
            row = [l.index, l.mean_cumulative_size, l.sd, l.se, l.mean_min_freq, l.min_freq_sd, l.min_freq_se]
            if dbs:
                d = dbs[i]
                row += [d["mean_size"], d["sd"], d["se"], d["mean_abs_diff"]]
            rows.append(row)
        return rows


def report_from(acc: PopulationAccumulator, distributions: Optional[Mapping] = None, filters: Optional[dict] = None) -> PopulationReport:
    if acc.sizes.count == 0:
        raise ValueError("no layer profiles to aggregate")
    s, f = acc.sizes, acc.min_freq
    layers = tuple(
        LayerStats(
            index=i,
            mean_cumulative_size=float(s.mean[i]),
            sd=float(s.sd[i]),
            se=float(s.se[i]),
            mean_min_freq=float(f.mean[i]),
            min_freq_sd=float(f.sd[i]),
            min_freq_se=float(f.se[i]),
        )
        for i in range(acc.k)
    )
    dbscan = None
    if acc.dbscan_sizes.count or acc.dbscan_inexact or acc.dbscan_infeasible:
        d, ad = acc.dbscan_sizes, acc.dbscan_absdiff
        dbscan = {
            "n_exact": int(d.count),
            "n_inexact": int(acc.dbscan_inexact),
            "n_infeasible": int(acc.dbscan_infeasible),
            "layers": [
                {
                    "index": i,
                    "mean_size": float(d.mean[i]),
                    "sd": float(d.sd[i]),
                    "se": float(d.se[i]),
                    "mean_abs_diff": float(ad.mean[i]),
                    "diff_of_means": float(abs(d.mean[i] - s.mean[i])) if d.count else None,
                }
                for i in range(acc.k)
            ]
            if d.count
            else [],
        }
    tables = None
    if distributions:
        tables = {}
        for name, vals in distributions.items():
            vals = np.asarray(vals, dtype=float)
            if vals.size == 0:
                tables[name] = {"x": [], "p": []}
                continue
            xs, ps = thin_table(*ccdf(vals))
            tables[name] = {"x": xs.tolist(), "p": ps.tolist()}
    return PopulationReport(
        k=acc.k,
        n_profiles=int(s.count),
        n_skipped=int(acc.skipped),
        layers=layers,
        ratio_of_means=tuple(scaling_ratios(s.mean.tolist())),
        kstar_distribution=_histogram_stats(acc.kstar),
        mean_silhouette=acc.silhouette_sum / acc.silhouette_n if acc.silhouette_n else None,
        n_silhouette=int(acc.silhouette_n),
        dbscan=dbscan,
        ccdf=tables,
        filters=filters,
    )


def aggregate(
    profiles: Iterable[LayerProfile],
    kstars: Iterable[KStarResult] = (),
    skipped: int = 0,
    distributions: Optional[Mapping] = None,
    filters: Optional[dict] = None,
) -> PopulationReport:
    """Per-layer mean, SD and SE of sizes and minimum frequencies, plus k* statistics."""
    profiles = list(profiles)
    if not profiles:
        raise ValueError("no layer profiles to aggregate")
    acc = PopulationAccumulator(k=profiles[0].k, skipped=skipped)
    for p in profiles:
        acc.add_profile(p)
    for r in kstars:
        acc.add_kstar(r)
    return report_from(acc, distributions, filters)
