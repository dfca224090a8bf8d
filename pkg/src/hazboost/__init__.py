"""Boosted nonparametric hazard estimation for survival data with
time-varying covariates."""

__version__ = "0.1.0"

from .boosting import (BoostedHazardModel, fit, init_f0, likelihood_risk, load_model,
                       predict_hazard, predict_survival, save_model)
from .data import (CATEGORICAL, CONTINUOUS, Column, DataError, Dataset, Epoch,
                   FunctionalSample, Schema, impute_dataset, impute_terminal_jump,
                   load_dataset, validate, write_dataset)
from .grid import SplitCandidateGrid, build_grid
from .metrics import (EvaluationPoint, auc_curve, auc_t, default_time_grid, l2_error,
                      sample_evaluation_points, survival_probabilities)
from .selection import (CvReport, ImportanceReport, bootstrap_importance, kfold_cv,
                        variable_importance)
from .simulation import (HazardFamily, SimulationSpec, SimulationTruth,
                         sample_event_time, sample_trajectory, simulate)
from .tree import (GrownTree, SplitEvaluation, TimeCovariateCube, accumulate_uv,
                   best_categorical_split, grow_tree, leaf_value, split_score)

__all__ = [
    "BoostedHazardModel", "CvReport", "Column", "DataError", "Dataset", "Epoch",
    "EvaluationPoint", "FunctionalSample", "GrownTree", "HazardFamily",
    "ImportanceReport", "Schema", "SimulationSpec", "SimulationTruth",
    "SplitCandidateGrid", "SplitEvaluation", "TimeCovariateCube",
    "CATEGORICAL", "CONTINUOUS",
    "accumulate_uv", "auc_curve", "auc_t", "best_categorical_split",
    "bootstrap_importance", "build_grid", "default_time_grid", "fit",
    "grow_tree", "impute_dataset", "impute_terminal_jump", "init_f0",
    "kfold_cv", "l2_error", "leaf_value", "likelihood_risk", "load_dataset",
    "load_model", "predict_hazard", "predict_survival",
    "sample_evaluation_points", "sample_event_time", "sample_trajectory",
    "save_model", "simulate", "split_score", "survival_probabilities",
    "validate", "variable_importance", "write_dataset",
]
