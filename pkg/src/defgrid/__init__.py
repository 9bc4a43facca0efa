"""Deformable triangular grid toolkit for image annotation.

A fixed-topology triangular grid is laid over an image and its vertices
are moved by gradient descent on a feature-variance energy, so that grid
edges align with image boundaries.  On top of the deformed grid sit
feature pooling, minimal-energy contour tracing, and unsupervised
partitioning into polygonal superpixels.
"""

from .assignment import (
    AssignmentField,
    CellStats,
    FeatureMap,
    candidate_cells,
    cell_stats,
    sign_dis,
    soft_assign,
)
from .energy import EnergyReport, LossWeights, total_energy
from .grid import (
    DeformedGrid,
    DegenerateCellError,
    GridError,
    GridTopology,
    build_topology,
    build_uniform_grid,
    grid_from_json,
    grid_to_json,
    signed_areas,
)
from .optimizer import (
    FlippedCellsError,
    NumericFailure,
    OptimizationTrace,
    OptimizerConfig,
    apply_external_offsets,
    deform,
)
from .partition import (
    AffinityGraph,
    SegmentationMap,
    agglomerate,
    build_affinity,
    metric_asa,
    metric_boundary,
    metric_miou,
)
from .pooling import CellFeatureGrid, grid_pool, label_cells, paste_back
from .tracer import (
    DegenerateSeedsError,
    NoBoundaryError,
    TracedPolygon,
    distance_transform,
    sample_seed_points,
    snap_seeds,
    trace_path,
)

__version__ = "0.1.0"

__all__ = [
    "AffinityGraph",
    "AssignmentField",
    "CellFeatureGrid",
    "CellStats",
    "DeformedGrid",
    "DegenerateCellError",
    "DegenerateSeedsError",
    "EnergyReport",
    "FeatureMap",
    "FlippedCellsError",
    "GridError",
    "GridTopology",
    "LossWeights",
    "NoBoundaryError",
    "NumericFailure",
    "OptimizationTrace",
    "OptimizerConfig",
    "SegmentationMap",
    "TracedPolygon",
    "agglomerate",
    "apply_external_offsets",
    "build_affinity",
    "build_topology",
    "build_uniform_grid",
    "candidate_cells",
    "cell_stats",
    "deform",
    "distance_transform",
    "grid_from_json",
    "grid_pool",
    "grid_to_json",
    "label_cells",
    "metric_asa",
    "metric_boundary",
    "metric_miou",
    "paste_back",
    "sample_seed_points",
    "sign_dis",
    "signed_areas",
    "snap_seeds",
    "soft_assign",
    "total_energy",
    "trace_path",
]
