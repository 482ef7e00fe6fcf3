"""Command-line entry point: ``ego-layers analyze`` and ``ego-layers synth``.

Exit status is 0 on success, 1 when the input cannot be parsed or fails
validation, and 2 for an invalid configuration.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import __version__
from .errors import EgoLayersError
from .ingest import read_store
from .pipeline import (
    AnalysisConfig,
    analyze_store,
    default_workers,
    file_digest,
    render_csv,
    render_json,
    report_meta,
    write_atomic,
    write_ccdf_tables,
)
from .synth import FACEBOOK_1, LayerSpec, generate_population

EXIT_OK, EXIT_DATA, EXIT_CONFIG = 0, 1, 2


class ConfigError(Exception):
    pass


def _u64(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("must be an unsigned 64-bit integer")
    return v


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ego-layers", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    a = sub.add_parser("analyze", help="detect layers in an interaction log")
    a.add_argument("input", type=Path, help="event CSV (src,dst,timestamp) or windowed CSV (a,b,c1,c2,c3,c4)")
    a.add_argument("--format", dest="input_format", choices=("events", "windowed"), default="events")
    a.add_argument("--download-time", type=int, help="epoch seconds of the crawl (event logs)")
    a.add_argument("--span-days", type=float, help="observation span T in days (windowed logs)")
    a.add_argument("--reconstruct-fraction", type=float, default=0.0)
    a.add_argument("--seed", type=_u64)
    a.add_argument("--min-ego-rate", type=float, default=10.0, help="interactions per month (strict)")
    a.add_argument("--min-edge-freq", type=float, default=1.0, help="interactions per year (strict)")
    mode = a.add_mutually_exclusive_group()
    mode.add_argument("--k", type=_positive_int, help="fixed number of layers")
    mode.add_argument("--k-max", type=_positive_int, default=20, help="largest k tried in selection mode")
    a.add_argument("--criterion", choices=("mixture", "spherical"), default="mixture")
    a.add_argument("--dbscan-check", action="store_true")
    a.add_argument("--report", type=Path, help="report path (default: stdout)")
    a.add_argument("--report-format", choices=("json", "csv"), default="json")
    a.add_argument("--emit-ccdf", type=Path, metavar="DIR")
    a.add_argument("--workers", type=_positive_int, default=None)

    s = sub.add_parser("synth", help="generate a planted-layer population")
    s.add_argument("--spec", type=Path, help="LayerSpec JSON (default: Facebook #1 profile)")
    s.add_argument("--egos", type=_positive_int, required=True)
    s.add_argument("--span-years", type=float, required=True)
    s.add_argument("--seed", type=_u64, required=True)
    s.add_argument("--out", type=Path, required=True)
    return parser


def _analysis_config(args) -> AnalysisConfig:
    if args.input_format == "events" and args.download_time is None:
        raise ConfigError("--download-time is required for --format events")
    if args.input_format == "windowed" and (args.span_days is None or not args.span_days > 0):
        raise ConfigError("--span-days > 0 is required for --format windowed")
    if not args.input.is_file():
        raise ConfigError(f"{args.input}: no such file")
    try:
        workers = args.workers or default_workers()
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    cfg = AnalysisConfig(
        min_ego_rate=args.min_ego_rate,
        min_edge_freq=args.min_edge_freq,
        k=args.k,
        k_max=args.k_max,
        criterion=args.criterion,
        dbscan_check=args.dbscan_check,
        reconstruct_fraction=args.reconstruct_fraction,
        seed=args.seed,
        workers=workers,
    )
    try:
        cfg.validate()
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return cfg


def run_analyze(args) -> int:
    cfg = _analysis_config(args)
    store = read_store(args.input, args.input_format, args.download_time, args.span_days)
    result = analyze_store(store, cfg)
    extra = {"input_format": args.input_format}
    if args.input_format == "events":
        extra["download_time"] = args.download_time
    else:
        extra["span_days"] = args.span_days
    meta = report_meta(cfg, file_digest(args.input), extra)
    text = render_json(result.report, meta) if args.report_format == "json" else render_csv(result.report)
    if args.emit_ccdf:
        write_ccdf_tables(result.distributions, args.emit_ccdf)
    if args.report:
        write_atomic(args.report, text)
        out = sys.stdout
    else:
        sys.stdout.write(text)
        out = sys.stderr
    rep = result.report
    sil = "n/a" if rep.mean_silhouette is None else f"{rep.mean_silhouette:.3f}"
    print(
        f"analyzed {rep.n_profiles} egos at k={rep.k}, skipped {rep.n_skipped}; "
        f"k* mode {rep.kstar_distribution['mode']}; mean silhouette {sil}",
        file=out,
    )
    return EXIT_OK


def run_synth(args) -> int:
    try:
        spec = LayerSpec.from_json(args.spec) if args.spec else LayerSpec(**FACEBOOK_1)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid spec: {exc}") from None
    except OSError as exc:
        raise ConfigError(f"{args.spec}: {exc.strerror or exc}") from None
    if not args.span_years > 0:
        raise ConfigError("--span-years must be positive")
    res = generate_population(spec, args.egos, args.span_years, args.seed, args.out)
    print(
        f"wrote {res['events']} events for {args.egos} egos to {res['paths']['events']} "
        f"(download time {res['download_time']})"
    )
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)  # usage errors exit 2
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        if args.command == "analyze":
            return run_analyze(args)
        return run_synth(args)
    except ConfigError as exc:
        print(f"ego-layers: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (EgoLayersError, ValueError, OSError) as exc:
        print(f"ego-layers: error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
