"""Joint training of the additive part and the tree-ensemble refinement.

Each outer iteration runs one Gauss-Seidel cycle on the additive
coefficients, then fits one regression tree to the pointwise negative
gradients and appends it with shrinkage.  A tree is only kept if the global
penalized objective does not increase, so the recorded objective trace is
non-increasing; training stops when the relative objective change drops
below the tolerance.

Setting lam1 = inf disables the additive part (all groups stay zero);
lam2 = inf disables the refinement entirely.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .basis import SplineSpec, block_lipschitz, build_design, make_spline_spec
from .boost import BoostModel, append_tree, fit_tree, predict_boost_matrix
from .dataio import Dataset
from .gam import GamModel, GamState, gam_pass, penalty_term, pie_values, \
    predict_gam_matrix
from .losses import get_loss, sigmoid

ACCEPT_SLACK = 1e-12


class FitError(RuntimeError):
    """Training aborted (non-finite objective or invalid inputs)."""


@dataclass(frozen=True)
class PieConfig:
    lam1: float = 0.01
    lam2: float = 0.01
    loss: str = "squared"
    t_max: int = 500
    tol: float = 1e-6
    shrinkage: float = 0.1
    max_leaves: int = 8
    min_leaf: int = 5
    n_basis: int = 8
    degree: int = 3
    seed: int = 0

    def __post_init__(self):
        if self.lam1 < 0 or self.lam2 < 0:
            raise ValueError("penalty weights must be non-negative")
        if self.t_max < 1 or self.max_leaves < 1 or self.min_leaf < 1:
            raise ValueError("iteration and tree-size settings must be at least 1")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if not 0.0 < self.shrinkage <= 1.0:
            raise ValueError("shrinkage must be in (0, 1]")
        if self.degree < 1:
            raise ValueError("degree must be at least 1")
        if self.n_basis != 1 and self.n_basis < self.degree + 1:
            raise ValueError("n_basis must be 1 (identity) or at least degree + 1")
        get_loss(self.loss)

    @property
    def n_interior(self) -> int:
        return self.n_basis - self.degree - 1


@dataclass
class PieModel:
    """Fitted model: an additive part plus a tree ensemble, f = g + kappa."""

    gam: GamModel
    boost: BoostModel
    loss_name: str
    config: PieConfig
    pipeline: object = None        # dataio.Pipeline when fit from raw CSV data
    meta: dict = field(default_factory=dict)

    @property
    def is_classifier(self) -> bool:
        return self.loss_name == "logistic"


@dataclass
class Breakdown:
    """Per-prediction attribution: intercept + per-feature contributions +
    the ensemble's cross-feature contribution sum exactly to the output."""

    intercept: float
    pie: dict[str, float]
    crust: float
    total: float
    crust_share: float

    def ordered_terms(self) -> list[tuple[str, float]]:
        """All contribution terms, largest magnitude first."""
        terms = [("(intercept)", self.intercept)]
        terms += list(self.pie.items())
        terms.append(("(crust)", self.crust))
        return sorted(terms, key=lambda t: -abs(t[1]))


def build_specs(ds: Dataset, cfg: PieConfig) -> list[SplineSpec]:
    """One basis spec per feature group: B-splines for numeric columns,
    identity for one-hot groups and for n_basis = 1."""
    specs = []
    for g in ds.groups:
        if cfg.n_basis == 1 or len(g.columns) > 1:
            specs.append(SplineSpec(feature=g.name, columns=tuple(g.columns),
                                    kind="identity"))
        else:
            specs.append(make_spline_spec(ds.X[:, g.columns[0]], g.name, g.columns,
                                          n_interior=cfg.n_interior, degree=cfg.degree))
    return specs


def negative_gradient(y: np.ndarray, fit: np.ndarray, loss) -> np.ndarray:
    """Pointwise negative loss derivative at the current prediction: the
    residual y - f for squared loss, y * sigmoid(-y f) for logistic."""
    return -loss.deriv(y, fit)


def objective_value(model: PieModel, X: np.ndarray, y: np.ndarray) -> float:
    """Recompute the global penalized objective of a model on data."""
    loss = get_loss(model.loss_name)
    f = predict_score(model, X)
    group_pen = sum(float(np.linalg.norm(c)) for c in model.gam.coefs)
    return loss.value_mean(y, f) \
        + penalty_term(model.config.lam1, group_pen) \
        + penalty_term(model.config.lam2, model.boost.penalty())


def fit_pie(ds: Dataset, cfg: PieConfig, pipeline=None) -> PieModel:
    """Train on an encoded, standardized dataset.

    Parameters
    ----------
    ds : Dataset
        Encoded feature matrix with target; logistic targets must be -1/+1.
    cfg : PieConfig
        Penalty weights, loss, and solver settings.
    pipeline : dataio.Pipeline, optional
        Schema and scaler to store on the model for raw-row prediction.
    """
    if ds.y is None:
        raise FitError("training data has no target column")
    if ds.n < 2:
        raise FitError("need at least 2 training rows")
    loss = get_loss(cfg.loss)
    loss.validate_targets(ds.y)
    y = np.asarray(ds.y, dtype=np.float64)
    n = ds.n

    specs = build_specs(ds, cfg)
    blocks = build_design(ds, specs)
    deltas = [1.0 / block_lipschitz(b, loss.curvature, n) for b in blocks]

    state = GamState(
        y=y, loss=loss, lam1=cfg.lam1, blocks=blocks, deltas=deltas,
        alphas=[np.zeros(b.spec.n_basis) for b in blocks],
        alpha0=0.0, fit=np.zeros(n),
        loss_mean=loss.value_mean(y, np.zeros(n)), group_pen=0.0,
    )
    boost = BoostModel(trees=[], shrinkage=cfg.shrinkage, lam2=cfg.lam2)
    tree_pen = 0.0
    skipped_trees = 0

    def current_objective():
        return state.loss_mean + penalty_term(cfg.lam1, state.group_pen) \
            + penalty_term(cfg.lam2, tree_pen)

    obj = current_objective()
    trace = [obj]
    iterations = 0
    converged = False

    for _ in range(cfg.t_max):
        iterations += 1
        gam_pass(state)

        if not math.isinf(cfg.lam2):
            resid = negative_gradient(y, state.fit, loss)
            tree = fit_tree(resid, ds.X, cfg.lam2, cfg.max_leaves, cfg.min_leaf)
            scaled = tree.scaled(cfg.shrinkage)
            fit_new = state.fit + scaled.predict(ds.X)
            loss_new = loss.value_mean(y, fit_new)
            w = scaled.leaf_weights()
            pen_new = tree_pen + float(len(w) + np.sum(w * w))
            before = current_objective()
            after = loss_new + penalty_term(cfg.lam1, state.group_pen) \
                + penalty_term(cfg.lam2, pen_new)
            # keep the tree only if the global objective does not go up;
            # late trees whose loss reduction cannot cover the per-leaf
            # penalty are dropped so the trace stays non-increasing
            if after <= before + ACCEPT_SLACK * (1.0 + abs(before)):
                boost = append_tree(boost, tree, cfg.shrinkage)
                state.fit = fit_new
                state.loss_mean = loss_new
                tree_pen = pen_new
            else:
                skipped_trees += 1

        new_obj = current_objective()
        if not math.isfinite(new_obj):
            raise FitError(
                f"objective became non-finite at iteration {iterations} "
                f"(loss={state.loss_mean!r}); check inputs and penalty weights"
            )
        trace.append(new_obj)
        if abs(obj - new_obj) < cfg.tol * (1.0 + abs(obj)):
            obj = new_obj
            converged = True
            break
        obj = new_obj

    warnings_list = list(state.stalls)
    if skipped_trees:
        warnings_list.append(
            f"{skipped_trees} fitted trees were dropped because the penalty "
            "outweighed their loss reduction"
        )
    if pipeline is not None and getattr(pipeline, "scaler", None) is not None:
        warnings_list.extend(pipeline.scaler.warnings)

    gmodel = GamModel(alpha0=state.alpha0, specs=specs, coefs=state.alphas)
    meta = {
        "iterations": iterations,
        "converged": converged,
        "final_objective": obj,
        "objective_trace": trace,
        "n_active": gmodel.n_active,
        "n_trees": boost.n_trees,
        "target_standardized": False,
        "warnings": warnings_list,
    }
    return PieModel(gam=gmodel, boost=boost, loss_name=cfg.loss, config=cfg,
                    pipeline=pipeline, meta=meta)


def predict_score(model: PieModel, X: np.ndarray) -> np.ndarray:
    """Raw additive + ensemble output for each encoded row."""
    X = np.asarray(X, dtype=np.float64)
    return predict_gam_matrix(model.gam, X) + predict_boost_matrix(model.boost, X)


def predict(model: PieModel, X: np.ndarray) -> np.ndarray:
    """Regression value, or class probability for logistic models."""
    score = predict_score(model, X)
    return sigmoid(score) if model.is_classifier else score


def extract_gam(model: PieModel) -> GamModel:
    """The purely additive part of a fitted model, ensemble discarded,
    without any refitting."""
    return model.gam


def explain(model: PieModel, x: np.ndarray) -> Breakdown:
    """Attribution for one encoded row.

    The crust share |kappa| / (sum_j |pie_j| + |kappa|) is a per-prediction
    convenience, not a dataset-level interpretability measure.
    """
    x = np.asarray(x, dtype=np.float64)
    vals = pie_values(model.gam, x)
    crust = float(predict_boost_matrix(model.boost, x[None, :])[0])
    total = model.gam.alpha0 + float(np.sum(vals)) + crust
    denom = float(np.sum(np.abs(vals))) + abs(crust)
    share = abs(crust) / denom if denom > 0 else 0.0
    return Breakdown(
        intercept=model.gam.alpha0,
        pie={spec.feature: float(v) for spec, v in zip(model.gam.specs, vals)},
        crust=crust,
        total=total,
        crust_share=share,
    )
