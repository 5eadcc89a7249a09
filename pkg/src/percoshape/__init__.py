"""Supercritical bond-percolation laboratory.

Estimators and exact solvers for flow constants, Wulff crystals,
anchored isoperimetric profiles, and cluster limit shapes on the
hypercubic lattice, plus a seeded experiment harness.
"""

__version__ = "0.1.0"

from .cheeger import (
    AnnealSchedule,
    CutsetConstruction,
    PipelineResult,
    brute_force_phi,
    construct_polytope_candidate,
    local_search_refine,
    parametric_phi,
    phi_pipeline,
)
from .clusters import (
    estimate_theta,
    good_cube_scan,
    infinite_cluster_proxy,
    label_clusters,
    open_adjacency,
    open_edge_boundary,
)
from .config import ExperimentConfig, default_config, parse_config, schema_text
from .errors import (
    CapacityError,
    ConditioningError,
    ConfigError,
    ConstructionFailedError,
    GeometryError,
    PercoshapeError,
)
from .experiments import (
    RunRecord,
    run_convergence_phi,
    run_experiment,
    run_shape_study,
)
from .flows import (
    CylinderSpec,
    NormTable,
    build_norm_table,
    circle_directions,
    estimate_beta,
    fibonacci_sphere_directions,
    tau,
)
from .geometry import (
    Polytope,
    WulffShape,
    analytic_norm_table,
    build_wulff,
    isoperimetric_constant,
)
from .lattice import BondConfiguration, BoxSpec, sample_configuration
from .shape import (
    EmpiricalMeasure,
    HoleDecomposition,
    SearchSchedule,
    VoxelMeasure,
    VoxelSet,
    continuous_set_and_perimeter,
    decompose_holes,
    distance_profile_family,
    enclosure_interior,
    fill_small_holes,
    hull,
    measure_compare,
    rasterize_translate,
    symmetric_difference_distance,
)
from .subgraphs import AnchoredSubgraph, RatioResult, make_anchored_subgraph

__all__ = [
    "__version__",
    "AnchoredSubgraph",
    "AnnealSchedule",
    "BondConfiguration",
    "BoxSpec",
    "CapacityError",
    "ConditioningError",
    "ConfigError",
    "ConstructionFailedError",
    "CutsetConstruction",
    "CylinderSpec",
    "EmpiricalMeasure",
    "ExperimentConfig",
    "GeometryError",
    "HoleDecomposition",
    "NormTable",
    "PercoshapeError",
    "PipelineResult",
    "Polytope",
    "RatioResult",
    "RunRecord",
    "SearchSchedule",
    "VoxelMeasure",
    "VoxelSet",
    "WulffShape",
    "analytic_norm_table",
    "brute_force_phi",
    "build_norm_table",
    "build_wulff",
    "circle_directions",
    "construct_polytope_candidate",
    "continuous_set_and_perimeter",
    "decompose_holes",
    "default_config",
    "distance_profile_family",
    "enclosure_interior",
    "estimate_beta",
    "estimate_theta",
    "fibonacci_sphere_directions",
    "fill_small_holes",
    "good_cube_scan",
    "hull",
    "infinite_cluster_proxy",
    "isoperimetric_constant",
    "label_clusters",
    "local_search_refine",
    "make_anchored_subgraph",
    "measure_compare",
    "open_adjacency",
    "open_edge_boundary",
    "parametric_phi",
    "parse_config",
    "phi_pipeline",
    "rasterize_translate",
    "run_convergence_phi",
    "run_experiment",
    "run_shape_study",
    "sample_configuration",
    "schema_text",
    "symmetric_difference_distance",
    "tau",
]
