"""Per-ego alter lists with contact frequencies, plus the activity filters."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterable, NamedTuple

import numpy as np

from .errors import ValidationError
from .ingest import EdgeStore

DAYS_PER_YEAR = 365.25
SECONDS_PER_DAY = 86400
SECONDS_PER_YEAR = DAYS_PER_YEAR * SECONDS_PER_DAY
MIN_DURATION_YEARS = 1.0 / DAYS_PER_YEAR
# right endpoints (days) of the month / six-month / year windows; the fourth is the dataset span
WINDOW_ENDS_DAYS = (30.0, 182.5, 365.25)

MIN_EGO_RATE = 10.0  # interactions per month
MIN_EDGE_FREQ = 1.0  # interactions per year


class Relationship(NamedTuple):
    alter: int
    n_interactions: int
    duration: float  # years
    frequency: float  # interactions per year


@dataclass(frozen=True)
class EgoNetwork:
    """An ego's relationships, sorted by descending frequency then alter id."""

    ego: int
    alters: np.ndarray
    n_interactions: np.ndarray
    durations: np.ndarray
    freqs: np.ndarray
    span_years: float
    total_interactions: int

    @property
    def size(self) -> int:
        return int(self.alters.size)

    @property
    def relationships(self) -> list:
        return [
            Relationship(int(a), int(n), float(d), float(f))
            for a, n, d, f in zip(self.alters, self.n_interactions, self.durations, self.freqs)
        ]

    @property
    def monthly_rate(self) -> float:
        return self.total_interactions / (self.span_years * 12.0)


def contact_frequency(n: int, d: float) -> float:
    """Interactions per year, with the duration clamped to at least one day."""
    if n < 0:
        raise ValueError("interaction count must be non-negative")
    if d < 0:
        raise ValueError("duration must be non-negative")
    return n / max(d, MIN_DURATION_YEARS)


def edge_duration_events(first_interaction: int, download_time: int) -> float:
    """Years between first contact and the download, at least one day."""
    if first_interaction > download_time:
        raise ValidationError(
            f"first interaction {first_interaction} is after download time {download_time}"
        )
    return max((download_time - first_interaction) / SECONDS_PER_YEAR, MIN_DURATION_YEARS)


def _window_durations_days(counts: np.ndarray, span_T: float) -> np.ndarray:
    c = np.asarray(counts).reshape(-1, 4)
    inc = np.diff(c, axis=1, prepend=0)
    active = inc > 0
    if not active.any(axis=1).all():
        raise ValueError("all-zero window counts have no duration; drop such edges first")
    ends = np.array([*WINDOW_ENDS_DAYS, float(span_T)])
    oldest = 3 - np.argmax(active[:, ::-1], axis=1)
    return ends[oldest]


def edge_duration_windowed(counts, span_T: float) -> float:
    """Duration in years: right end of the oldest window with new interactions.

    Increments are (c1, c2-c1, c3-c2, c4-c3) over windows ending 30, 182.5,
    365.25 and ``span_T`` days back from the download.
    """
    return float(_window_durations_days(np.asarray(counts), span_T)[0]) / DAYS_PER_YEAR


def _split_by_ego(ego, alter, n, dur, span: dict, total: dict) -> list:
    freq = n / dur
    order = np.lexsort((alter, -freq, ego))
    ego, alter, n, dur, freq = ego[order], alter[order], n[order], dur[order], freq[order]
    cuts = np.flatnonzero(ego[1:] != ego[:-1]) + 1
    starts = np.concatenate(([0], cuts)).tolist()
    stops = np.concatenate((cuts, [ego.size])).tolist()
    out = []
    for s, e in zip(starts, stops):
        u = int(ego[s])
        out.append(
            EgoNetwork(
                ego=u,
                alters=alter[s:e],
                n_interactions=n[s:e],
                durations=dur[s:e],
                freqs=freq[s:e],
                span_years=span[u],
                total_interactions=total[u],
            )
        )
    return out


def _relationship_arrays(store: EdgeStore):
    """Both directions of every nonzero edge, plus per-ego span (years) and total count."""
    if store.kind == "events":
        lo = np.minimum(store.a, store.b)
        hi = np.maximum(store.a, store.b)
        order = np.lexsort((hi, lo))
        lo, hi = lo[order], hi[order]
        cnt, first = store.counts[order], store.first[order]
        new = np.ones(lo.size, dtype=bool)
        new[1:] = (lo[1:] != lo[:-1]) | (hi[1:] != hi[:-1])
        starts = np.flatnonzero(new)
        lo, hi = lo[starts], hi[starts]
        n = np.add.reduceat(cnt, starts)
        first = np.minimum.reduceat(first, starts)
        keep = n > 0
        lo, hi, n, first = lo[keep], hi[keep], n[keep], first[keep]
        dur = np.maximum((store.download_time - first) / SECONDS_PER_YEAR, MIN_DURATION_YEARS)
        first2 = np.concatenate((first, first))
    else:
        n = store.counts[:, 3]
        keep = n > 0
        lo, hi, n = store.a[keep], store.b[keep], n[keep]
        dur = _window_durations_days(store.counts[keep], store.span_days) / DAYS_PER_YEAR
    ego = np.concatenate((lo, hi))
    alter = np.concatenate((hi, lo))
    n2 = np.concatenate((n, n)).astype(np.int64)
    dur2 = np.concatenate((dur, dur)).astype(float)
    egos, inv = np.unique(ego, return_inverse=True)
    if store.kind == "events":
        # per-ego observation span runs from its earliest incident event
        earliest = np.full(egos.size, np.iinfo(np.int64).max)
        np.minimum.at(earliest, inv, first2)
        span_years = np.maximum((store.download_time - earliest) / SECONDS_PER_YEAR, MIN_DURATION_YEARS)
    else:
        span_years = np.full(egos.size, store.span_days / DAYS_PER_YEAR)
    totals = np.bincount(inv, weights=n2, minlength=egos.size).astype(np.int64)
    return ego, alter, n2, dur2, egos, inv, span_years, totals


def build_ego_networks(store: EdgeStore) -> list:
    """One EgoNetwork per node with at least one nonzero-interaction edge, ordered by ego id."""
    if store.n_edges == 0:
        return []
    ego, alter, n2, dur2, egos, _, span_years, totals = _relationship_arrays(store)
    if ego.size == 0:
        return []
    span = dict(zip(egos.tolist(), span_years.tolist()))
    total = dict(zip(egos.tolist(), totals.tolist()))
    return _split_by_ego(ego, alter, n2, dur2, span, total)


def build_active_ego_networks(store: EdgeStore, min_rate: float = MIN_EGO_RATE) -> tuple:
    """``build_ego_networks`` followed by ``filter_active_egos``, filtering before the split.

    Returns ``(kept, n_egos, n_discarded)``. Equivalent to the two-step form
    but never materialises the networks of inactive egos.
    """
    if store.n_edges == 0:
        return [], 0, 0
    ego, alter, n2, dur2, egos, inv, span_years, totals = _relationship_arrays(store)
    if ego.size == 0:
        return [], 0, 0
    if not np.all(span_years > 0):
        raise ValueError("non-positive observation span")
    active = totals / (span_years * 12.0) > min_rate
    rows = active[inv]
    span = dict(zip(egos[active].tolist(), span_years[active].tolist()))
    total = dict(zip(egos[active].tolist(), totals[active].tolist()))
    kept = _split_by_ego(ego[rows], alter[rows], n2[rows], dur2[rows], span, total) if rows.any() else []
    return kept, int(egos.size), int(egos.size - active.sum())


def filter_active_egos(egos: Iterable[EgoNetwork], min_rate: float = MIN_EGO_RATE) -> tuple:
    """Keep egos averaging strictly more than ``min_rate`` interactions per month.

    Returns ``(kept, n_discarded)``.
    """
    kept = []
    dropped = 0
    for ego in egos:
        if not ego.span_years > 0:
            raise ValueError(f"ego {ego.ego} has non-positive observation span")
        if ego.monthly_rate > min_rate:
            kept.append(ego)
        else:
            dropped += 1
    return kept, dropped


def filter_active_edges(ego: EgoNetwork, min_freq: float = MIN_EDGE_FREQ) -> EgoNetwork:
    """Drop relationships contacted at most ``min_freq`` times per year."""
    keep = ego.freqs > min_freq
    if keep.all():
        return ego
    return replace(
        ego,
        alters=ego.alters[keep],
        n_interactions=ego.n_interactions[keep],
        durations=ego.durations[keep],
        freqs=ego.freqs[keep],
    )
