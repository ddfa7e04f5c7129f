"""Evaluation and model selection: relative prediction error, the
interpretable-share score, cross-validation over the penalty grid, sparse
selection, and sensitivity matrices.

The error normalizer uses the mean of the evaluation set itself, so a
report is a function of that set alone.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .dataio import Dataset, kfold_split, standardize, fit_scaler, apply_scaler
from .gam import predict_gam_matrix
from .losses import get_loss
from .trainer import PieConfig, PieModel, fit_pie, predict_score

DEFAULT_LAMBDA1_GRID = tuple(float(v) for v in np.logspace(-4, 0, 5))
DEFAULT_LAMBDA2_GRID = tuple(float(v) for v in np.logspace(-4, 0, 5)) + (math.inf,)


def rpe(y_hat: np.ndarray, y: np.ndarray) -> float:
    """Squared error normalized by total variation around the mean of the
    evaluation set; 0 is a perfect fit, 1 matches the mean-only model."""
    y_hat = np.asarray(y_hat, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if y_hat.shape != y.shape:
        raise ValueError("prediction and target lengths differ")
    if y.size < 2:
        raise ValueError("undefined RPE: need at least 2 rows")
    denom = float(np.sum((y - y.mean()) ** 2))
    if denom == 0.0:
        raise ValueError("undefined RPE: constant target")
    return float(np.sum((y - y_hat) ** 2)) / denom


def r_squared(y_hat: np.ndarray, y: np.ndarray) -> float:
    return 1.0 - rpe(y_hat, y)


def log_loss(y: np.ndarray, score: np.ndarray) -> float:
    """Mean logistic loss of raw scores against -1/+1 targets."""
    return get_loss("logistic").value_mean(np.asarray(y, float), np.asarray(score, float))


def accuracy(y: np.ndarray, score: np.ndarray) -> float:
    pred = np.where(np.asarray(score) >= 0.0, 1.0, -1.0)
    return float(np.mean(pred == np.asarray(y, float)))


def pi_score(model: PieModel, ds: Dataset) -> float:
    """Share of explained variation attributable to the additive part:
    R2 of the additive predictions over R2 of the full model.

    Exactly 1 when the ensemble is empty.  Values above 1 (the additive
    part alone outscoring the full model) are reported as-is with a
    warning.
    """
    if model.is_classifier:
        raise ValueError("pi-score is undefined for logistic models")
    if model.boost.n_trees == 0:
        return 1.0
    if ds.y is None:
        raise ValueError("pi-score needs a dataset with targets")
    r2_f = r_squared(predict_score(model, ds.X), ds.y)
    if r2_f <= 0.0:
        raise ValueError("pi-score undefined: model explains no variance")
    r2_g = r_squared(predict_gam_matrix(model.gam, ds.X), ds.y)
    score = r2_g / r2_f
    if score > 1.0:
        warnings.warn(f"pi-score {score:.4f} exceeds 1: additive part alone "
                      "outscores the full model on this data")
    return score


@dataclass
class FoldEval:
    rpe: float | None
    r2: float | None
    pi_score: float | None
    n_active: int | None
    error: str | None = None


@dataclass
class EvalReport:
    """Per-(lam1, lam2) cross-validation summary."""

    lam1: float
    lam2: float
    folds: list[FoldEval]
    mean_rpe: float | None
    std_rpe: float | None
    mean_pi_score: float | None
    mean_active: float | None
    n_failed: int


@dataclass
class CvResult:
    reports: list[EvalReport]
    best: EvalReport | None
    k: int
    seed: int
    metric: str                  # "rpe" for squared loss, "log_loss" for logistic

    def report_at(self, lam1: float, lam2: float) -> EvalReport:
        for rep in self.reports:
            if rep.lam1 == lam1 and rep.lam2 == lam2:
                return rep
        raise KeyError(f"no grid cell ({lam1}, {lam2})")


def _eval_fold(cfg: PieConfig, train: Dataset, test: Dataset, classifier: bool) -> FoldEval:
    try:
        train_std, scaler = standardize(train, train)
        test_std = apply_scaler(test, scaler)
        model = fit_pie(train_std, cfg)
        score = predict_score(model, test_std.X)
        if classifier:
            return FoldEval(rpe=log_loss(test.y, score), r2=None, pi_score=None,
                            n_active=model.gam.n_active)
        err = rpe(score, test.y)
        try:
            pi = pi_score(model, test_std)
        except ValueError:
            pi = None
        return FoldEval(rpe=err, r2=1.0 - err, pi_score=pi, n_active=model.gam.n_active)
    except Exception as exc:  # recorded per cell, never fatal
        return FoldEval(rpe=None, r2=None, pi_score=None, n_active=None,
                        error=f"{type(exc).__name__}: {exc}")


def _summarize(lam1: float, lam2: float, folds: list[FoldEval]) -> EvalReport:
    errs = [f.rpe for f in folds if f.error is None]
    pis = [f.pi_score for f in folds if f.error is None and f.pi_score is not None]
    acts = [f.n_active for f in folds if f.error is None]
    return EvalReport(
        lam1=lam1, lam2=lam2, folds=folds,
        mean_rpe=float(np.mean(errs)) if errs else None,
        std_rpe=float(np.std(errs)) if errs else None,
        mean_pi_score=float(np.mean(pis)) if pis else None,
        mean_active=float(np.mean(acts)) if acts else None,
        n_failed=sum(1 for f in folds if f.error is not None),
    )


def _pick_best(reports: list[EvalReport]) -> EvalReport | None:
    """Minimum mean test error; ties prefer larger lam1, then larger lam2."""
    usable = [r for r in reports if r.mean_rpe is not None]
    if not usable:
        return None
    return min(usable, key=lambda r: (r.mean_rpe, -r.lam1, -r.lam2))


def cross_validate(ds: Dataset, lam1_grid, lam2_grid, k: int, seed: int,
                   cfg: PieConfig = PieConfig()) -> CvResult:
    """k-fold evaluation of every (lam1, lam2) grid point.

    The dataset should be encoded but not scaled: scaling is refit on each
    training fold and applied to its test fold.  Fold assignment is a pure
    function of the seed, so identical calls reproduce identical tables.
    """
    lam1_grid = list(lam1_grid)
    lam2_grid = list(lam2_grid)
    if not lam1_grid or not lam2_grid:
        raise ValueError("penalty grids must be non-empty")
    if ds.y is None:
        raise ValueError("cross-validation needs a dataset with targets")
    classifier = cfg.loss == "logistic"
    folds = kfold_split(ds, k, seed)
    splits = [(ds.take(tr), ds.take(te)) for tr, te in folds]

    reports = []
    for lam1 in lam1_grid:
        for lam2 in lam2_grid:
            cell_cfg = PieConfig(**{**_cfg_dict(cfg), "lam1": lam1, "lam2": lam2})
            evals = [_eval_fold(cell_cfg, tr, te, classifier) for tr, te in splits]
            reports.append(_summarize(lam1, lam2, evals))
    return CvResult(reports=reports, best=_pick_best(reports), k=k, seed=seed,
                    metric="log_loss" if classifier else "rpe")


def _cfg_dict(cfg: PieConfig) -> dict:
    return {f: getattr(cfg, f) for f in PieConfig.__dataclass_fields__}


def sparse_select(cv: CvResult, max_active: int = 8) -> EvalReport:
    """Best grid cell among those whose mean active-feature count stays
    within the cap; falls back to the sparsest cell (with a warning) when
    no cell qualifies."""
    usable = [r for r in cv.reports if r.mean_rpe is not None]
    if not usable:
        raise ValueError("sparse_select: no grid cell produced a usable fit")
    eligible = [r for r in usable if r.mean_active is not None and r.mean_active <= max_active]
    if not eligible:
        warnings.warn(f"no grid cell kept at most {max_active} active features; "
                      "returning the sparsest cell")
        return min(usable, key=lambda r: (r.mean_active if r.mean_active is not None
                                          else math.inf, r.mean_rpe))
    return min(eligible, key=lambda r: (r.mean_rpe, -r.lam1, -r.lam2))


@dataclass
class SensitivityResult:
    lam1_grid: list[float]
    lam2_grid: list[float]
    rpe: np.ndarray            # len(lam1_grid) x len(lam2_grid), nan on failure
    pi_score: np.ndarray
    errors: list[str] = field(default_factory=list)


def sensitivity_grid(ds: Dataset, lam1_list, lam2_list, holdout: float, seed: int,
                     cfg: PieConfig = PieConfig()) -> SensitivityResult:
    """One fit per (lam1, lam2) on a train split, metrics on the holdout.

    Output matrices are plot-ready: rows follow lam1_list, columns follow
    lam2_list.
    """
    lam1_list = list(lam1_list)
    lam2_list = list(lam2_list)
    if not lam1_list or not lam2_list:
        raise ValueError("penalty grids must be non-empty")
    if not 0.0 < holdout < 1.0:
        raise ValueError("holdout fraction must be in (0, 1)")
    rng = np.random.default_rng(seed)
    order = rng.permutation(ds.n)
    n_test = max(1, int(round(ds.n * holdout)))
    if n_test >= ds.n:
        raise ValueError("holdout fraction leaves no training rows")
    test_idx, train_idx = order[:n_test], order[n_test:]
    train, test = ds.take(np.sort(train_idx)), ds.take(np.sort(test_idx))
    train_std, scaler = standardize(train, train)
    test_std = apply_scaler(test, scaler)

    shape = (len(lam1_list), len(lam2_list))
    rpe_mat = np.full(shape, np.nan)
    pi_mat = np.full(shape, np.nan)
    errors = []
    for i, lam1 in enumerate(lam1_list):
        for j, lam2 in enumerate(lam2_list):
            cell_cfg = PieConfig(**{**_cfg_dict(cfg), "lam1": lam1, "lam2": lam2})
            try:
                model = fit_pie(train_std, cell_cfg)
                rpe_mat[i, j] = rpe(predict_score(model, test_std.X), test.y)
                try:
                    pi_mat[i, j] = pi_score(model, test_std)
                except ValueError:
                    pass
            except Exception as exc:
                errors.append(f"cell ({lam1}, {lam2}): {type(exc).__name__}: {exc}")
    return SensitivityResult(lam1_grid=lam1_list, lam2_grid=lam2_list,
                             rpe=rpe_mat, pi_score=pi_mat, errors=errors)
