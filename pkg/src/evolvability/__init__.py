"""Evolvability analysis of neuroevolutionary behavior landscapes."""

from evolvability._accel import USE_NUMBA, backend_name
from evolvability.diversity import (
    Archive,
    DiversityMetric,
    KdeConfig,
    ancestor_chain_distance,
    archive_maybe_admit,
    kde_novelty,
    knn_novelty,
    metric_from_name,
    parent_distance,
    score_offspring,
)
from evolvability.environment import (
    ConstantLandscape,
    LinearLandscape,
    PointPushWorld,
    PushBehavior,
    SinusoidLandscape,
    analytic_behavior,
    rollout,
)
from evolvability.genotype import Genotype, NetworkShape, decode, encode, forward, xavier_init
from evolvability.landscape import (
    MetricReport,
    dissimila_ratios,
    evolvability_expected,
    evolvability_max,
    global_sensitivity,
    local_sensitivity_expected,
    local_sensitivity_max,
    metric_report,
    niche_coverage,
    population_evolvability,
)
from evolvability.markov import (
    LEvolvabilityEstimate,
    TransitionMatrix,
    child_distribution,
    estimate_transition_matrix,
    l_evolvability,
    simulate_descendants,
)
from evolvability.niches import NicheGrid
from evolvability.stats import kruskal_wallis, spearman, summarize
from evolvability.variation import MutationConfig, OffspringSet, mutate, sample_neighbors
from evolvability.walks import WalkConfig, WalkRecord, run_walk

__version__ = "0.1.0"
