"""Sparse spline additive models jointly trained with a penalized
gradient-boosting refinement, with per-prediction attribution."""

from .basis import BasisMatrix, SplineSpec, block_lipschitz, build_design, eval_basis, \
    make_knots, make_spline_spec
from .boost import BoostModel, RegressionTree, append_tree, best_split, fit_tree, \
    leaf_weight, predict_boost, predict_boost_matrix
from .dataio import (ColumnSchema, DataError, Dataset, FeatureGroup, Pipeline,
                     ScalerParams, SchemaError, apply_scaler, fit_scaler, kfold_split,
                     load_csv, one_hot_encode, read_schema, standardize)
from .gam import GamModel, gam_pass, group_prox, pie_values, pie_values_matrix, \
    predict_gam, predict_gam_matrix
from .losses import get_loss, sigmoid
from .metrics import (CvResult, EvalReport, SensitivityResult, accuracy,
                      cross_validate, log_loss, pi_score, r_squared, rpe,
                      sensitivity_grid, sparse_select)
from .persist import ModelFormatError, load_model, save_model
from .trainer import (Breakdown, FitError, PieConfig, PieModel, explain, extract_gam,
                      fit_pie, negative_gradient, objective_value, predict,
                      predict_score)

__version__ = "0.1.0"
