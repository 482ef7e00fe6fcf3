"""Synthetic ego networks with planted layers, written as ingest-compatible logs.

Every ego is a star: its alters are private to it, each alter belongs to one
planted layer and interacts with the ego as a homogeneous Poisson process at
its true contact frequency over the observation span.
"""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass
from pathlib import Path
import numpy as np
import pandas as pd

from .egonet import SECONDS_PER_YEAR

# ego e gets id (e + 1) * ID_STRIDE; its alters follow it consecutively
ID_STRIDE = 1 << 20
DOWNLOAD_TIME = 1_250_000_000  # 2009-08-11T14:13:20Z

FACEBOOK_1 = {
    "cumulative_sizes": [1.68, 5.28, 14.92, 40.93],
    "layer_freqs": [77.4, 30.3, 11.2, 2.5],
}


@dataclass(frozen=True)
class LayerSpec:
    """Planted layer structure, innermost layer first.

    ``cumulative_sizes`` may be fractional; annulus sizes are rounded up or
    down at random so their expectation matches. ``layer_freqs`` is the
    mean contact frequency (per year) of each layer's alters, which are
    spread by a unit-mean log-normal factor with log-sd ``freq_noise``.
    ``size_jitter`` in [0, 1] blends each annulus size towards a Poisson draw
    with the same mean.
    """

    cumulative_sizes: tuple
    layer_freqs: tuple
    freq_noise: float = 0.2
    size_jitter: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "cumulative_sizes", tuple(float(s) for s in self.cumulative_sizes))
        object.__setattr__(self, "layer_freqs", tuple(float(f) for f in self.layer_freqs))
        sizes, freqs = self.cumulative_sizes, self.layer_freqs
        if not sizes or len(sizes) != len(freqs):
            raise ValueError("cumulative_sizes and layer_freqs must be non-empty and equally long")
        if sizes[0] <= 0 or any(b <= a for a, b in zip(sizes, sizes[1:])):
            raise ValueError("cumulative_sizes must be positive and strictly increasing")
        if freqs[-1] <= 0 or any(b >= a for a, b in zip(freqs, freqs[1:])):
            raise ValueError("layer_freqs must be positive and strictly decreasing")
        if self.freq_noise < 0:
            raise ValueError("freq_noise must be non-negative")
        if not 0.0 <= self.size_jitter <= 1.0:
            raise ValueError("size_jitter must lie in [0, 1]")

    @property
    def annulus_means(self) -> np.ndarray:
        return np.diff(self.cumulative_sizes, prepend=0.0)

    @classmethod
    def from_json(cls, path) -> "LayerSpec":
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
        return cls(**data)

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


@dataclass(frozen=True)
class PlantedEgo:
    ego: int
    alters: np.ndarray
    layers: np.ndarray
    true_freqs: np.ndarray
    # realised event log: one row per interaction
    src: np.ndarray
    dst: np.ndarray
    timestamps: np.ndarray

    @property
    def annulus_sizes(self) -> list:
        return np.bincount(self.layers, minlength=int(self.layers.max(initial=-1)) + 1).tolist()


def _annulus_sizes(spec: LayerSpec, rng: np.random.Generator) -> np.ndarray:
    mean = spec.annulus_means
    target = mean
    if spec.size_jitter > 0:
        target = mean + spec.size_jitter * (rng.poisson(mean) - mean)
    target = np.maximum(target, 0.0)
    base = np.floor(target)
    # Bernoulli rounding keeps the expected size equal to the target
    return (base + (rng.random(target.size) < target - base)).astype(np.int64)


def generate_ego(
    spec: LayerSpec,
    span: float,
    seed: int,
    ego_index: int = 0,
    download_time: int = DOWNLOAD_TIME,
) -> PlantedEgo:
    """Draw one planted ego; identical (spec, span, seed, ego_index) give identical output."""
    if not span > 0:
        raise ValueError("span must be positive")
    if not isinstance(spec, LayerSpec):
        raise ValueError("spec must be a LayerSpec")
    rng = np.random.default_rng([int(seed), int(ego_index)])
    sizes = _annulus_sizes(spec, rng)
    layers = np.repeat(np.arange(sizes.size), sizes)
    if layers.size >= ID_STRIDE - 1:
        raise ValueError("too many alters for the id layout")
    base = np.asarray(spec.layer_freqs)[layers]
    if spec.freq_noise > 0:
        # log-normal factor with unit mean, so layer_freqs are the layer means
        sigma = spec.freq_noise
        freqs = base * np.exp(sigma * rng.standard_normal(layers.size) - 0.5 * sigma * sigma)
    else:
        freqs = base.copy()

    ego_id = (int(ego_index) + 1) * ID_STRIDE
    alters = ego_id + 1 + np.arange(layers.size, dtype=np.int64)
    n_events = rng.poisson(freqs * span)
    owner = np.repeat(alters, n_events)
    start = download_time - int(round(span * SECONDS_PER_YEAR))
    ts = rng.integers(start, download_time, size=owner.size, endpoint=True)
    outgoing = rng.random(owner.size) < 0.5
    src = np.where(outgoing, ego_id, owner)
    dst = np.where(outgoing, owner, ego_id)
    order = np.lexsort((dst, src, ts))
    return PlantedEgo(
        ego=ego_id,
        alters=alters,
        layers=layers,
        true_freqs=freqs,
        src=src[order],
        dst=dst[order],
        timestamps=ts[order],
    )


def _atomic_write(path: Path, write) -> None:
    tmp = path.with_name(path.name + ".tmp")
    try:
        with open(tmp, "w", encoding="utf-8", newline="") as fh:
            write(fh)
        os.replace(tmp, path)
    except OSError as exc:
        raise OSError(f"{path}: {exc.strerror or exc}") from exc
    finally:
        if tmp.exists():
            tmp.unlink()


def generate_population(
    spec: LayerSpec,
    m: int,
    span: float,
    seed: int,
    out_dir,
    download_time: int = DOWNLOAD_TIME,
) -> dict:
    """Write ``events.csv``, ``oracle.csv`` and ``synth.json`` for m planted egos.

    Returns the written paths plus the download time to pass to ingest.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"{out}: {exc.strerror or exc}") from exc

    egos = [generate_ego(spec, span, seed, e, download_time) for e in range(m)]
    events = pd.DataFrame(
        {
            "src": np.concatenate([e.src for e in egos]),
            "dst": np.concatenate([e.dst for e in egos]),
            "timestamp": np.concatenate([e.timestamps for e in egos]),
        }
    )
    oracle = pd.DataFrame(
        {
            "ego": np.concatenate([np.full(e.alters.size, e.ego) for e in egos]),
            "alter": np.concatenate([e.alters for e in egos]),
            "layer": np.concatenate([e.layers for e in egos]),
            "true_freq": np.concatenate([e.true_freqs for e in egos]),
        }
    )
    paths = {"events": out / "events.csv", "oracle": out / "oracle.csv", "meta": out / "synth.json"}
    _atomic_write(paths["events"], lambda fh: events.to_csv(fh, index=False, lineterminator="\n"))
    _atomic_write(
        paths["oracle"],
        lambda fh: oracle.to_csv(fh, index=False, lineterminator="\n", float_format="%.17g"),
    )
    meta = {
        "spec": asdict(spec),
        "egos": m,
        "span_years": span,
        "seed": seed,
        "download_time": download_time,
        "events": int(len(events)),
    }
    _atomic_write(paths["meta"], lambda fh: fh.write(json.dumps(meta, indent=2, sort_keys=True) + "\n"))
    return {"paths": paths, "download_time": download_time, "events": int(len(events)), "egos": egos}


def read_oracle(path) -> pd.DataFrame:
    return pd.read_csv(path, dtype={"ego": np.int64, "alter": np.int64, "layer": np.int64, "true_freq": float})
