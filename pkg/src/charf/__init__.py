"""Missing genotype imputation with chains of autoreplicative random forests."""

from .baselines import KnnParams, knn_impute, mode_impute
from .evaluation import accuracy, bench_scaling, grid_search, markov_genotypes, run_benchmark
from .forest import FitParams, ForestModel, fit, gini_multi, predict
from .genotype import MISSING, GenotypeMatrix, complete_rows, load_matrix, one_hot_encode, write_matrix
from .imputer import (
    CharfParams,
    ChainPlan,
    VoteTally,
    WindowPlan,
    autoreplicate,
    charf_impute,
    impute_chain,
    make_chains,
    plan_windows,
    suggest_window_size,
    training_size_curve,
)
from .missing import MissingMask, TrialSet, corrupt_like, make_trials, mask_mcar

__version__ = "0.1.0"
