"""Independent reference implementations used as test oracles, plus shared helpers."""

from __future__ import annotations

import io
import itertools
import math

import numpy as np
import pytest

from ego_layers.ingest import parse_event_log

# ----------------------------------------------------------------------------
# oracles


def brute_force_partition(values, k):
    """Minimum WCSS over every contiguous k-partition, with the lexicographically
    smallest boundary vector among the minimisers."""
    x = [float(v) for v in values]
    n = len(x)
    best, best_bounds = math.inf, None
    for bounds in itertools.combinations(range(1, n), k - 1):
        edges = (0, *bounds, n)
        total = 0.0
        for a, b in zip(edges[:-1], edges[1:]):
            seg = x[a:b]
            mu = sum(seg) / len(seg)
            total += sum((v - mu) ** 2 for v in seg)
        # near-equal costs count as ties, so the earliest (smallest) bounds win
        if total < best * (1 - 1e-12) - 1e-15:
            best, best_bounds = total, bounds
    return best, best_bounds


def naive_silhouette(values, labels):
    x = [float(v) for v in values]
    n = len(x)
    clusters = sorted(set(labels))
    if len(clusters) < 2:
        return None
    scores = []
    for i in range(n):
        own = [j for j in range(n) if labels[j] == labels[i] and j != i]
        if not own:
            scores.append(0.0)
            continue
        a = sum(abs(x[i] - x[j]) for j in own) / len(own)
        b = min(
            sum(abs(x[i] - x[j]) for j in range(n) if labels[j] == c) / labels.count(c)
            for c in clusters
            if c != labels[i]
        )
        m = max(a, b)
        scores.append(0.0 if m == 0 else (b - a) / m)
    return sum(scores) / n


def reference_mixture_aic(values, sizes):
    """Per-cluster loop version of the Gaussian-mixture AIC (soft likelihood).

    Written independently of the vectorised scorer: each cluster gets weight
    n_i/n, its sample mean and unbiased variance; degenerate clusters use the
    gap to the nearest outside value (d**2 for singletons, (d/6)**2 for runs of
    equal values).
    """
    x = np.asarray(values, dtype=float)
    n = x.size
    k = len(sizes)
    comps = []
    start = 0
    for m in sizes:
        seg = x[start : start + m]
        outside = np.concatenate((x[:start], x[start + m :]))
        if seg.max() == seg.min():
            if outside.size == 0:
                return 2.0 * (3 * k - 1)
            d = np.min(np.abs(outside - seg[0]))
            var = d * d if m == 1 else (d / 6.0) ** 2
            mu = seg[0]
        else:
            var = seg.var(ddof=1)
            mu = seg.mean()
        if var == 0:
            return math.inf
        comps.append((m / n, mu, var))
        start += m
    ll = 0.0
    for v in x:
        dens = [w * math.exp(-((v - mu) ** 2) / (2 * var)) / math.sqrt(2 * math.pi * var) for w, mu, var in comps]
        total = sum(dens)
        if total == 0.0:
            logs = [
                math.log(w) - 0.5 * math.log(2 * math.pi * var) - (v - mu) ** 2 / (2 * var) for w, mu, var in comps
            ]
            top = max(logs)
            ll += top + math.log(sum(math.exp(l - top) for l in logs))
        else:
            ll += math.log(total)
    return -2.0 * ll + 2.0 * (3 * k - 1)


def naive_dbscan(values, eps, min_pts=2):
    """Textbook O(n^2) DBSCAN; border points reachable from two clusters go to the
    higher-value one. Returns (clusters as index tuples in descending order, noise)."""
    x = [float(v) for v in values]
    n = len(x)
    nbrs = [[j for j in range(n) if abs(x[i] - x[j]) <= eps] for i in range(n)]
    core = [len(nb) >= min_pts for nb in nbrs]
    label = [-1] * n
    cid = 0
    for i in range(n):  # i ascends, values descend: higher clusters are found first
        if not core[i] or label[i] >= 0:
            continue
        stack = [i]
        label[i] = cid
        while stack:
            p = stack.pop()
            for q in nbrs[p]:
                if label[q] < 0:
                    label[q] = cid
                    if core[q]:
                        stack.append(q)
        cid += 1
    clusters = tuple(tuple(i for i in range(n) if label[i] == c) for c in range(cid))
    noise = tuple(i for i in range(n) if label[i] < 0)
    return clusters, noise


# ----------------------------------------------------------------------------
# helpers


def event_store(rows, download_time):
    body = "src,dst,timestamp\n" + "".join(f"{s},{d},{t}\n" for s, d, t in rows)
    return parse_event_log(io.StringIO(body), download_time)


def events_text(planted):
    return "src,dst,timestamp\n" + "".join(
        f"{s},{d},{t}\n" for s, d, t in zip(planted.src, planted.dst, planted.timestamps)
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# ----------------------------------------------------------------------------
# acceptance summary: one line per criterion at the end of the session

ACCEPTANCE_LINES: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
