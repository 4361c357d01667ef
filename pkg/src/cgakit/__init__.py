"""Cooperative game abstractions: interaction-weight models of characteristic
functions, their estimation from data, and Shapley / least-core analysis."""

from .errors import CapacityError, CgaError, DomainError, FormatError, NumericalError
from .game import (
    Allocation,
    CgaModel,
    Game,
    PlayerUniverse,
    eval_cga,
    group_shapley,
    random_cga,
    shapley_bruteforce,
    shapley_from_weights,
    truncate,
    weights_from_game,
)
from .identification import (
    build_design_matrix,
    check_identifiability,
    misspec_error,
    misspec_spectrum,
)
from .estimation import (
    FitConfig,
    LowRankPairwiseModel,
    MatchupDataset,
    PerformanceDataset,
    fit_bradley_terry,
    fit_least_squares,
    fit_lowrank_pairwise,
    pairwise_to_cga,
    predict_win_prob,
)
from .analysis import (
    NoiseExperiment,
    l1_bounds,
    l2_worst_bound,
    mc_average_case,
    pmac_coverage,
    shapley_matrix,
    spectrum,
)
from .allocation import (
    SampleBudget,
    exact_max_deficit,
    improve_allocation,
    sampled_least_core_value,
)
from .experiments import CompletionQuery, best_completion, score_team_percentile, simulate_game

__version__ = "0.1.0"
