"""Synthetic test data for subgroup and distribution-shift evaluation of tabular classifiers."""

from .data import Dataset, Feature, Schema, SubgroupSpec, category, load_csv, load_schema, split
from .errors import ConfigError, DataError, NumericError, SynthTestError
from .evaluation import Augmented, PerfEstimate, balanced_subgroup_report, estimate, intersectional_matrix
from .generator import CopulaGenerator, GeneratorEnsemble, fit_copula, fit_ensemble, load_generators, save_generators
from .groundtruth import GroundTruthSpec, simulate_ground_truth
from .metrics import Metric, metric_value
from .predictors import fit_predictor, load_external
from .quality import mmd_rbf, select_generator
from .shifts import PriorSpec, generate_shifted, generate_with_prior, rejection_sample, sensitivity_sweep

__version__ = "0.1.0"

__all__ = [
    "Augmented", "ConfigError", "CopulaGenerator", "DataError", "Dataset", "Feature", "GeneratorEnsemble",
    "GroundTruthSpec", "Metric", "NumericError", "PerfEstimate", "PriorSpec", "Schema", "SubgroupSpec",
    "SynthTestError", "balanced_subgroup_report", "category", "estimate", "fit_copula", "fit_ensemble",
    "fit_predictor", "generate_shifted", "generate_with_prior", "intersectional_matrix", "load_csv",
    "load_external", "load_generators", "load_schema", "metric_value", "mmd_rbf", "rejection_sample",
    "save_generators", "select_generator", "sensitivity_sweep", "simulate_ground_truth", "split",
]
