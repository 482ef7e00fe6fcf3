"""Layered (Dunbar-circle) structure of ego networks from interaction logs."""

__version__ = "0.1.0"

from .cluster import (
    ClusterConfig,
    KMeansTable,
    KStarResult,
    aic_score,
    kmeans_1d,
    mixture_aic,
    select_k,
    silhouette_mean,
    variance_explained,
)
from .density import DensityClustering, calibrate_eps, dbscan_1d
from .egonet import (
    EgoNetwork,
    build_ego_networks,
    contact_frequency,
    edge_duration_events,
    edge_duration_windowed,
    filter_active_edges,
    filter_active_egos,
)
from .errors import EgoLayersError, InfeasibleTargetError, ParseError, ValidationError
from .ingest import EdgeStore, parse_event_log, parse_windowed_edges, read_store, reconstruct_missing
from .layers import LayerProfile, PopulationReport, aggregate, ccdf, nest_clusters, scaling_ratios
from .synth import LayerSpec, PlantedEgo, generate_ego, generate_population

__all__ = [name for name in dir() if not name.startswith("_")]
