"""Spatiotemporal hotspot detection from labeled count tensors.

Two complementary detectors over the same inputs (a population tensor, a
cases tensor, and a region adjacency): an eigenvector-element-matching
detector that works on tensors of any order, and a space-time scan
statistic baseline with Monte Carlo significance. A synthesis and
evaluation harness compares the two.
"""

from .errors import (
    ConvergenceError,
    DegenerateModeError,
    EigenspotError,
    InputError,
    NumericalError,
)
from .tensors import (
    CountTensor,
    EigenModel,
    ModeLabel,
    canonicalize_sign,
    decompose,
    default_ranks,
    gram_eigen,
    top_eigenpairs,
    unfold,
)
from .eigenmatch import (
    ClusterSet,
    DiffVector,
    HotspotReport,
    NeighborMatrix,
    SpatialPartition,
    TemporalResult,
    element_diff,
    grow_first_priority,
    grow_second_priority,
    partition_spatial,
    partition_temporal,
    population_std,
    run_sst_hotspot,
    sign_correct,
    temporal_intervals,
)
from .stscan import (
    ScanCylinder,
    ScanResult,
    enumerate_cylinders,
    monte_carlo_p,
    scan,
    score,
)
from .dataio import (
    ModeSpec,
    RecordSchema,
    RegionGeometry,
    build_tensor,
    dumps_stable,
    ingest_pair,
    load_schema,
    parse_adjacency,
    parse_centroids,
    parse_records,
    read_report,
    write_geojson,
    write_report,
)
from .evalsynth import (
    ComparisonTable,
    InjectedTruth,
    Metrics,
    SynthConfig,
    SynthData,
    compare,
    generate,
    precision_recall_f1,
    write_comparison,
)

__version__ = "0.1.0"

__all__ = [
    "EigenspotError",
    "InputError",
    "NumericalError",
    "ConvergenceError",
    "DegenerateModeError",
    "CountTensor",
    "ModeLabel",
    "EigenModel",
    "unfold",
    "gram_eigen",
    "top_eigenpairs",
    "decompose",
    "default_ranks",
    "canonicalize_sign",
    "NeighborMatrix",
    "DiffVector",
    "SpatialPartition",
    "ClusterSet",
    "TemporalResult",
    "HotspotReport",
    "population_std",
    "sign_correct",
    "element_diff",
    "partition_spatial",
    "grow_first_priority",
    "grow_second_priority",
    "partition_temporal",
    "temporal_intervals",
    "run_sst_hotspot",
    "ScanCylinder",
    "ScanResult",
    "score",
    "enumerate_cylinders",
    "scan",
    "monte_carlo_p",
    "ModeSpec",
    "RecordSchema",
    "RegionGeometry",
    "load_schema",
    "parse_records",
    "build_tensor",
    "parse_adjacency",
    "parse_centroids",
    "write_report",
    "read_report",
    "write_geojson",
    "dumps_stable",
    "ingest_pair",
    "Metrics",
    "SynthConfig",
    "SynthData",
    "InjectedTruth",
    "ComparisonTable",
    "precision_recall_f1",
    "generate",
    "compare",
    "write_comparison",
]
