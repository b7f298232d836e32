"""Model-based discriminant analysis with stepwise variable selection and
semi-supervised updating."""

from .covariance import CovarianceSet, CovarianceStructure, GroupScatter, estimate, param_count
from .dataset import Dataset, LabeledSplit, aggregate, load_csv, merge_classes, stratified_split
from .harness import RunReport, evaluate, evaluate_split, frequency_histogram
from .mixture import (
    MixtureModel,
    Responsibilities,
    best_structure_fit,
    classify,
    fit_semisupervised,
    fit_supervised,
)
from .modelcomp import ComparisonResult, Comparator, RegressionFit, compare_add, compare_remove
from .search import SearchConfig, SelectionState, greedy_step, headlong_step, initial_ranking, run

__version__ = "0.1.0"
