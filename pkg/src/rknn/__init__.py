"""Point configurations from k-nearest-neighbor Riesz energies.

Only the k nearest neighbors of each point interact, so an energy
evaluation costs O(kN) after a k-d tree query. Minimizers spread uniformly,
or follow a prescribed density through a weight or an external field.
"""
from .analysis import (
    AsymptoticsFit,
    DistributionReport,
    LatitudeBands,
    TensorCells,
    asymptotics_fit,
    covering_radius,
    empirical_density,
    k_monotonicity_check,
    separation,
    short_range_check,
)
from .density import (
    DensityTarget,
    calibrate_Csdk,
    constant_Cs1k,
    constant_full_1d,
    floor_density,
    lookup_constant,
    rho_equilibrium,
    solve_L1,
    upsert_registry,
    weight_from_density,
)
from .energy import (
    ConstantWeight,
    DensityWeight,
    EnergyModel,
    FieldSpec,
    RadialWeight,
    energy,
    energy_full,
    evaluate,
    gradient,
    validate_weight,
)
from .geometry import (
    Box,
    ImplicitSurface,
    ProjectionError,
    SamplingError,
    Sphere,
    Torus,
    domain_from_json,
    implicit_surface,
)
from .neighbors import NeighborGraph, build_graph, knn_brute
from .optimize import OptimizationError, OptimizerConfig, RunTrace, minimize, prolong

__version__ = "0.1.0"
