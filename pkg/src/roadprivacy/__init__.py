"""Location privacy on road networks.

Perturbation mechanisms over weighted graphs, Bayesian inference attacks,
utility/privacy metrics, and a greedy output-range optimizer, plus a CLI
for reproducible experiments.
"""

__version__ = "0.1.0"

from .attacks import (
    AttackError,
    InferenceStrategy,
    PriorDistribution,
    brute_force_attack,
    map_strategy,
    observation_probs,
    optimal_attack,
    posterior,
    posterior_strategy,
    strategy_from_csv,
    strategy_to_csv,
)
from .estimators import (
    GraphExponentialMechanism,
    GreedyRangeOptimizer,
    PlanarLaplace,
    PlanarLaplaceOnGraph,
)
from .graph import (
    DistanceMatrix,
    GraphError,
    PlanarPoint,
    RoadGraph,
    all_pairs,
    dump_graph,
    load_graph,
    make_cross_map,
    make_lattice,
    make_line,
    make_two_vertex,
    nearest_vertex,
    nearest_vertices,
)
from .mechanism import (
    MechanismError,
    MechanismMatrix,
    gem_matrix,
    gem_sample,
    matrix_from_csv,
    matrix_to_csv,
    plm_sample,
    plmg_matrix,
    postprocess,
    privacy_loss,
)
from .metrics import (
    EvaluationReport,
    adversarial_error,
    check_hiding_bound,
    check_informed_bound,
    evaluate_mechanism,
    performance_criterion,
    q_loss,
    true_probability,
)
from .optimize import (
    OptimizationConfig,
    OptimizationResult,
    OptimizeError,
    approx_ae_topk,
    approx_qloss_topk,
    greedy_optimize,
    init_range_by_qloss,
    pc_objective,
    qloss_objective,
    range_from_text,
    range_to_text,
)
from .scenarios import (
    PoiWeightedPrior,
    Table,
    four_hotspot_lattice,
    hotspot_prior,
    optimize_pipeline,
    poi_prior,
    run_cross_map_study,
    run_epsilon_sweep,
    run_hotspot_optimization,
    run_line_sweep,
    run_tp_sweep,
)

__all__ = [name for name in dir() if not name.startswith("_")]
