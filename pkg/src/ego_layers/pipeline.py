"""End-to-end analysis: ego construction, filters, per-ego clustering, aggregation.

Per-ego work is a pure function of the ego's frequencies, so it is farmed
out in fixed-size chunks and reassembled in ego order; the report therefore
does not depend on the worker count.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .cluster import KMeansTable, KStarResult
from .density import calibrate_eps
from .egonet import (
    MIN_EDGE_FREQ,
    MIN_EGO_RATE,
    build_active_ego_networks,
    filter_active_edges,
)
from .ingest import EdgeStore, reconstruct_missing
from .layers import LayerProfile, PopulationAccumulator, PopulationReport, ccdf, nest_annuli, report_from

log = logging.getLogger(__name__)

CHUNK = 512
WORKERS_ENV = "EGO_LAYERS_WORKERS"


def default_workers() -> int:
    env = os.environ.get(WORKERS_ENV)
    if env:
        try:
            n = int(env)
        except ValueError:
            raise ValueError(f"{WORKERS_ENV}={env!r} is not an integer") from None
        if n < 1:
            raise ValueError(f"{WORKERS_ENV} must be >= 1")
        return n
    return max(1, os.cpu_count() or 1)


@dataclass
class AnalysisConfig:
    min_ego_rate: float = MIN_EGO_RATE
    min_edge_freq: float = MIN_EDGE_FREQ
    k: Optional[int] = None  # fixed-k mode when set
    k_max: int = 20
    criterion: str = "mixture"
    dbscan_check: bool = False
    reconstruct_fraction: float = 0.0
    seed: Optional[int] = None
    workers: int = field(default_factory=default_workers)

    def validate(self) -> None:
        if self.k is not None and self.k < 1:
            raise ValueError("--k must be >= 1")
        if self.k_max < 1:
            raise ValueError("--k-max must be >= 1")
        if not 0.0 <= self.reconstruct_fraction <= 1.0:
            raise ValueError("--reconstruct-fraction must lie in [0, 1]")
        if self.reconstruct_fraction > 0 and self.seed is None:
            raise ValueError("--seed is required when --reconstruct-fraction > 0")
        if self.seed is not None and not 0 <= self.seed < 2**64:
            raise ValueError("--seed must be an unsigned 64-bit integer")
        if self.workers < 1:
            raise ValueError("--workers must be >= 1")

    @property
    def mode(self) -> str:
        return "fixed-k" if self.k is not None else "select-k"

    def public(self) -> dict:
        """Settings that influence results (worker count deliberately excluded)."""
        d = asdict(self)
        d.pop("workers")
        d["mode"] = self.mode
        return d


@dataclass(frozen=True)
class EgoOutcome:
    ego: int
    n: int
    kstar: Optional[KStarResult] = None
    profile: Optional[LayerProfile] = None
    skip: Optional[str] = None
    dbscan_annuli: Optional[tuple] = None
    dbscan_exact: bool = False


def _kstar_chunk(args) -> list:
    """k* per ego, plus the optimal boundaries at every k for the layer pass."""
    chunk, k_max, criterion = args
    out = []
    for ego, freqs in chunk:
        table = KMeansTable(freqs, k_max)
        res = table.select(criterion=criterion)
        out.append((res, tuple(table.boundaries(k) for k in range(1, table.k_max + 1))))
    return out


def _layer_one(ego: int, freqs: np.ndarray, k: int, dbscan: bool, bounds: Optional[tuple] = None) -> EgoOutcome:
    n = freqs.size
    if n < k:
        return EgoOutcome(ego, n, skip="too_small")
    if bounds is None:
        bounds = KMeansTable(freqs, k).boundaries(k)
    edges = (0, *bounds, n)
    sizes = [b - a for a, b in zip(edges[:-1], edges[1:])]
    minima = [freqs[b - 1] for b in edges[1:]]
    try:
        profile = nest_annuli(sizes, minima, ego=ego)
    except ValueError:
        # identical frequencies split across clusters: no strictly nested layering
        return EgoOutcome(ego, n, skip="tied")
    annuli, exact = None, False
    if dbscan and n >= 2 * k:
        dc = calibrate_eps(freqs, k)
        annuli, exact = tuple(dc.sizes), dc.exact
    return EgoOutcome(ego, n, profile=profile, dbscan_annuli=annuli, dbscan_exact=exact)


def _layer_chunk(args) -> list:
    chunk, k, dbscan = args
    return [
        _layer_one(ego, freqs, k, dbscan, bounds[k - 1] if k <= len(bounds) else None)
        for ego, freqs, bounds in chunk
    ]


def _fixed_chunk(args) -> list:
    """Fixed-k mode: one DP table per ego serves both k* and the layer profile."""
    chunk, k, k_max, criterion, dbscan = args
    out = []
    for ego, freqs in chunk:
        table = KMeansTable(freqs, max(k, k_max))
        kstar = table.select(k_max=k_max, criterion=criterion)
        bounds = table.boundaries(k) if k <= table.k_max else None
        out.append((kstar, _layer_one(ego, freqs, k, dbscan, bounds)))
    return out


def _run_chunks(fn, payloads: list, workers: int) -> list:
    if workers <= 1 or len(payloads) <= 1:
        results = [fn(p) for p in payloads]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(fn, payloads))
    return [item for chunk in results for item in chunk]


def _chunks(items: list) -> list:
    return [items[i : i + CHUNK] for i in range(0, len(items), CHUNK)]


@dataclass
class AnalysisResult:
    report: PopulationReport
    outcomes: list
    kstars: dict
    distributions: dict
    filters: dict
    layer_k: int


def analyze_store(store: EdgeStore, config: AnalysisConfig) -> AnalysisResult:
    config.validate()
    if config.reconstruct_fraction > 0:
        store = reconstruct_missing(store, config.reconstruct_fraction, config.seed)

    active, n_egos, n_inactive = build_active_ego_networks(store, config.min_ego_rate)
    nets = [filter_active_edges(e, config.min_edge_freq) for e in active]
    work = [(e.ego, e.freqs) for e in nets if e.size > 0]
    log.info("%d egos, %d active, %d with active alters", n_egos, len(active), len(work))

    distributions = {
        "contact_frequency": np.concatenate([e.freqs for e in active]) if active else np.empty(0),
        "ego_network_size": np.array([e.size for e in active], dtype=float),
        "active_network_size": np.array([e.size for e in nets], dtype=float),
    }

    kstars = {}
    if config.k is not None:
        layer_k = config.k
        pairs = _run_chunks(
            _fixed_chunk,
            [(c, layer_k, config.k_max, config.criterion, config.dbscan_check) for c in _chunks(work)],
            config.workers,
        )
        outcomes = []
        for (ego, _), (kstar, layer) in zip(work, pairs):
            kstars[ego] = kstar
            outcomes.append(layer)
    else:
        results = _run_chunks(
            _kstar_chunk, [(c, config.k_max, config.criterion) for c in _chunks(work)], config.workers
        )
        kstars = {ego: r for (ego, _), (r, _) in zip(work, results)}
        counts = np.bincount([r.k_star for r, _ in results]) if results else np.zeros(2, dtype=int)
        # layers are built at the population's modal k*
        layer_k = int(np.argmax(counts)) if results else 1
        staged = [(ego, freqs, bounds) for (ego, freqs), (_, bounds) in zip(work, results)]
        outcomes = _run_chunks(
            _layer_chunk, [(c, layer_k, config.dbscan_check) for c in _chunks(staged)], config.workers
        )

    acc = PopulationAccumulator(k=layer_k)
    for (ego, _), out in zip(work, outcomes):
        acc.add_kstar(kstars[ego])
        if out.profile is None:
            acc.skipped += 1
            continue
        acc.add_profile(out.profile)
        if config.dbscan_check:
            acc.add_dbscan(out.profile.cumulative_sizes, out.dbscan_annuli, out.dbscan_exact)

    skips = {}
    for out in outcomes:
        if out.skip:
            skips[out.skip] = skips.get(out.skip, 0) + 1
    filters = {
        "min_ego_rate_per_month": config.min_ego_rate,
        "min_edge_freq_per_year": config.min_edge_freq,
        "reconstruct_fraction": config.reconstruct_fraction,
        "egos_total": n_egos,
        "egos_inactive": n_inactive,
        "egos_active": len(active),
        "egos_without_active_alters": len(active) - len(work),
        "egos_clustered": len(work),
        "egos_profiled": acc.sizes.count,
        "egos_skipped_too_small": skips.get("too_small", 0),
        "egos_skipped_tied": skips.get("tied", 0),
    }
    report = report_from(acc, distributions, filters)
    return AnalysisResult(report, outcomes, kstars, distributions, filters, layer_k)


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def report_meta(config: AnalysisConfig, input_digest: Optional[str] = None, extra: Optional[dict] = None) -> dict:
    meta = {"package": "ego_layers", "version": __version__, "config": config.public()}
    if input_digest:
        meta["input_sha256"] = input_digest
    if extra:
        meta.update(extra)
    return meta


def write_atomic(path, text: str) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    try:
        with open(tmp, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    finally:
        if tmp.exists():
            tmp.unlink()


def render_json(report: PopulationReport, meta: dict) -> str:
    return json.dumps(report.to_dict(meta), indent=2, sort_keys=False, allow_nan=False) + "\n"


def render_csv(report: PopulationReport) -> str:
    lines = []
    for row in report.csv_rows():
        lines.append(",".join(repr(v) if isinstance(v, float) else str(v) for v in row))
    return "\n".join(lines) + "\n"


def write_ccdf_tables(distributions: dict, out_dir) -> list:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for name in sorted(distributions):
        vals = np.asarray(distributions[name], dtype=float)
        rows = ["x,ccdf"]
        if vals.size:
            xs, ps = ccdf(vals)
            rows += [f"{x!r},{p!r}" for x, p in zip(xs.tolist(), ps.tolist())]
        path = out / f"{name}.csv"
        write_atomic(path, "\n".join(rows) + "\n")
        written.append(path)
    return written
