"""Interaction-log ingest: timestamped event CSVs and windowed-count edge CSVs.

Both formats land in an :class:`EdgeStore` holding per-edge aggregate counts
as numpy arrays. Event stores are directed and keep the first interaction
time of each edge; windowed stores are undirected and keep the four
cumulative window counts.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, replace
from typing import Optional, TextIO

import numpy as np
import pandas as pd

from .errors import ParseError, ValidationError

EVENT_HEADER = ("src", "dst", "timestamp")
WINDOWED_HEADER = ("a", "b", "c1", "c2", "c3", "c4")


@dataclass(frozen=True)
class EdgeStore:
    """Aggregated edges.

    For ``kind == "events"``: ``a -> b`` is a directed edge, ``counts`` has
    shape (m,) and ``first`` the earliest timestamp per edge. For
    ``kind == "windowed"``: ``a < b`` keys an undirected edge and ``counts``
    has shape (m, 4) with cumulative window counts c1..c4.
    Edges are sorted by (a, b).
    """

    kind: str
    a: np.ndarray
    b: np.ndarray
    counts: np.ndarray
    first: Optional[np.ndarray] = None
    download_time: Optional[int] = None
    span_days: Optional[float] = None

    @property
    def n_edges(self) -> int:
        return int(self.a.size)

    @property
    def nodes(self) -> np.ndarray:
        return np.unique(np.concatenate((self.a, self.b)))

    def edge_totals(self) -> np.ndarray:
        """Interaction count per edge (c4 for windowed stores)."""
        return self.counts if self.kind == "events" else self.counts[:, 3]

    def total(self) -> int:
        return int(self.edge_totals().sum())


def _read_header(stream: TextIO, expected: tuple) -> str:
    header = stream.readline()
    if not header:
        raise ParseError("missing header", line=1)
    fields = tuple(f.strip() for f in header.rstrip("\r\n").split(","))
    if fields != expected:
        raise ParseError(f"expected header {','.join(expected)!r}, got {header.strip()!r}", line=1)
    return header


def _strict_int(text: str) -> int:
    t = text.strip()
    if not t or not (t.isdigit() or (t[0] in "+-" and t[1:].isdigit())):
        raise ValueError(text)
    return int(t)


def _scan_rows(body: str, width: int) -> np.ndarray:
    """Row-by-row reader; slower than pandas but reports exact line numbers."""
    rows = []
    for offset, row in enumerate(csv.reader(io.StringIO(body))):
        line = offset + 2
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if len(row) != width:
            raise ParseError(f"expected {width} fields, got {len(row)}", line=line)
        try:
            rows.append([_strict_int(f) for f in row])
        except ValueError as exc:
            raise ParseError(f"non-integer field {exc.args[0]!r}", line=line) from None
    if not rows:
        return np.empty((0, width), dtype=np.int64)
    return np.asarray(rows, dtype=np.int64)


def _read_body(stream: TextIO, width: int) -> tuple:
    """Integer matrix of the data rows plus their 1-based file line numbers."""
    body = stream.read()
    if not body.strip():
        return np.empty((0, width), dtype=np.int64), np.empty(0, dtype=np.int64)
    try:
        frame = pd.read_csv(
            io.StringIO(body), header=None, dtype=np.int64, engine="c", skip_blank_lines=False
        )
        if frame.shape[1] != width:
            raise ValueError("arity")
        data = frame.to_numpy(dtype=np.int64)
        lines = np.arange(2, data.shape[0] + 2, dtype=np.int64)
        return data, lines
    except (ValueError, pd.errors.ParserError, OverflowError):
        pass
    data = _scan_rows(body, width)  # raises ParseError with the line number
    # blank lines were skipped; recover line numbers for later validation errors
    lines = [i + 2 for i, raw in enumerate(body.splitlines()) if raw.strip()]
    return data, np.asarray(lines, dtype=np.int64)


def parse_event_log(stream: TextIO, download_time: int) -> EdgeStore:
    """Read a ``src,dst,timestamp`` CSV into a directed :class:`EdgeStore`."""
    _read_header(stream, EVENT_HEADER)
    data, lines = _read_body(stream, 3)
    src, dst, ts = data[:, 0], data[:, 1], data[:, 2]

    bad = np.flatnonzero(src == dst)
    if bad.size:
        raise ValidationError(f"line {lines[bad[0]]}: self-interaction {src[bad[0]]}->{dst[bad[0]]}")
    bad = np.flatnonzero(ts < 0)
    if bad.size:
        raise ValidationError(f"line {lines[bad[0]]}: negative timestamp {ts[bad[0]]}")
    bad = np.flatnonzero(ts > download_time)
    if bad.size:
        raise ValidationError(
            f"line {lines[bad[0]]}: timestamp {ts[bad[0]]} after download time {download_time}"
        )

    if src.size == 0:
        empty = np.empty(0, dtype=np.int64)
        return EdgeStore("events", empty, empty.copy(), empty.copy(), empty.copy(), int(download_time))

    order = np.lexsort((dst, src))
    s, d, t = src[order], dst[order], ts[order]
    new = np.ones(s.size, dtype=bool)
    new[1:] = (s[1:] != s[:-1]) | (d[1:] != d[:-1])
    starts = np.flatnonzero(new)
    counts = np.diff(np.append(starts, s.size)).astype(np.int64)
    first = np.minimum.reduceat(t, starts)
    return EdgeStore(
        kind="events",
        a=s[starts],
        b=d[starts],
        counts=counts,
        first=first,
        download_time=int(download_time),
    )


def parse_windowed_edges(stream: TextIO, span_T: float) -> EdgeStore:
    """Read an ``a,b,c1,c2,c3,c4`` CSV into an undirected :class:`EdgeStore`."""
    if not span_T > 0:
        raise ValueError("span_T must be positive")
    _read_header(stream, WINDOWED_HEADER)
    data, lines = _read_body(stream, 6)
    a, b, c = data[:, 0], data[:, 1], data[:, 2:6]

    bad = np.flatnonzero(a == b)
    if bad.size:
        raise ValidationError(f"line {lines[bad[0]]}: self-edge {a[bad[0]]},{b[bad[0]]}")
    bad = np.flatnonzero((c < 0).any(axis=1))
    if bad.size:
        raise ValidationError(f"line {lines[bad[0]]}: negative count on edge {a[bad[0]]},{b[bad[0]]}")
    bad = np.flatnonzero((np.diff(c, axis=1) < 0).any(axis=1))
    if bad.size:
        i = bad[0]
        raise ValidationError(
            f"line {lines[i]}: edge {a[i]},{b[i]} counts {tuple(c[i].tolist())} are not cumulative"
        )

    lo, hi = np.minimum(a, b), np.maximum(a, b)
    order = np.lexsort((hi, lo))
    lo, hi, c, lines = lo[order], hi[order], c[order], lines[order]
    dup = np.flatnonzero((lo[1:] == lo[:-1]) & (hi[1:] == hi[:-1]))
    if dup.size:
        i = dup[0]
        first_line, second_line = sorted((int(lines[i]), int(lines[i + 1])))
        raise ValidationError(
            f"line {second_line}: duplicate edge {{{lo[i]},{hi[i]}}} (first seen on line {first_line})"
        )
    return EdgeStore(kind="windowed", a=lo, b=hi, counts=c.astype(np.int64), span_days=float(span_T))


def sample_size(fraction: float, n: int) -> int:
    """ceil(fraction * n), immune to binary rounding such as 0.07 * 100."""
    return min(n, math.ceil(round(fraction * n, 9)))


def reconstruct_missing(store: EdgeStore, fraction: float, seed: int) -> EdgeStore:
    """Double interaction counts on every edge touching a random node sample.

    Exactly ceil(fraction * N) nodes are drawn without replacement; an edge
    is doubled once even when both endpoints are drawn. Zero counts stay zero.
    """
    if not 0.0 <= fraction <= 1.0:
        raise ValueError(f"fraction must lie in [0, 1], got {fraction}")
    if not 0 <= seed < 2**64:
        raise ValueError("seed must be an unsigned 64-bit integer")
    nodes = store.nodes
    k = sample_size(fraction, nodes.size)
    if k == 0 or store.n_edges == 0:
        return store
    rng = np.random.default_rng(seed)
    picked = np.zeros(nodes.size, dtype=bool)
    picked[rng.choice(nodes.size, size=k, replace=False)] = True
    touched = picked[np.searchsorted(nodes, store.a)] | picked[np.searchsorted(nodes, store.b)]
    factor = np.where(touched, 2, 1).astype(np.int64)
    counts = store.counts * (factor if store.counts.ndim == 1 else factor[:, None])
    return replace(store, counts=counts)


def read_store(
    path,
    fmt: str,
    download_time: Optional[int] = None,
    span_days: Optional[float] = None,
) -> EdgeStore:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        if fmt == "events":
            if download_time is None:
                raise ValueError("event logs need a download time")
            return parse_event_log(fh, download_time)
        if fmt == "windowed":
            if span_days is None:
                raise ValueError("windowed logs need a span in days")
            return parse_windowed_edges(fh, span_days)
    raise ValueError(f"unknown format {fmt!r}")
