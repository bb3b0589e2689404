"""Reweighted region-graph approximations of discrete log partition functions."""

from .concavity import (
    ConcavityReport,
    EdgeLabeling,
    HessianProbe,
    SymmetricPoint,
    ZetaHessian,
    check_bethe_concavity,
    check_kikuchi_concavity,
    hall_labeling,
    hessian_probe,
    restrict_to_vertices,
    size_class_weights,
    symmetric_pseudomarginal,
    symmetric_slice_curvature,
    symmetric_tables,
    zeta_hessian,
)
from .errors import KikuchiError
from .message_passing import (
    MessageSet,
    SolverOptions,
    SolverResult,
    pairwise_problem,
    pairwise_weights,
    run_kikuchi_rsp,
    run_pairwise_rsp,
    stationarity_residual,
)
from .models import (
    Graph,
    IsingModel,
    complete_graph,
    ising_log_potentials,
    sample_ising,
    torus_grid,
)
from .objective import (
    BetheEntropyForms,
    LocalPolytopeReport,
    ObjectiveValue,
    bethe_entropy_forms,
    exact_entropy,
    exact_log_partition,
    exact_marginals,
    kikuchi_entropy,
    kikuchi_objective,
    validate_local_polytope,
)
from .polytope import (
    HullMembership,
    MaxWeightForest,
    PolytopeMembership,
    Thresholds,
    convex_hull_membership,
    enumerate_F,
    in_concavity_polytope,
    incidence_single_cycle_forest,
    is_single_cycle_forest,
    lp_upper_bound,
    max_weight_single_cycle_forest,
    proposition1_witness,
    sample_conv_F,
    uniform_thresholds_exhaustive,
    uniform_weight_thresholds,
)
from .region_graph import (
    RegionGraph,
    TwoLayerView,
    build_region_graph,
    from_ising,
    overcounting_numbers,
    two_layer_view,
)
from .tables import FactorTable, Pseudomarginals, entropy, kl_divergence, marginalize

__version__ = "0.1.0"
