"""Sparse spline additive model fit by blockwise proximal gradient descent.

One pass cycles through the coefficient groups in ascending feature order
(Gauss-Seidel: each update sees the blocks already updated this cycle) and
finishes with the intercept.  Every step is guarded by backtracking so the
penalized objective never increases.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .basis import SplineSpec, BasisMatrix, design_rows, eval_basis

MAX_HALVINGS = 50
ACCEPT_SLACK = 1e-12


def penalty_term(lam: float, total: float) -> float:
    """lam * total with the convention inf * 0 = 0, so disabling sentinels
    keep the objective finite."""
    if total == 0.0:
        return 0.0
    return lam * total


def group_prox(gamma: np.ndarray, tau: float) -> np.ndarray:
    """Block soft-threshold: scale gamma by max(0, 1 - tau/||gamma||),
    returning an exact zero vector when the norm is at or below tau."""
    if tau < 0:
        raise ValueError("threshold must be non-negative")
    if tau == 0.0:
        return gamma.copy()
    norm = float(np.linalg.norm(gamma))
    if norm <= tau:
        return np.zeros_like(gamma)
    return gamma * (1.0 - tau / norm)


def block_gradient(psi: np.ndarray, y: np.ndarray, fit: np.ndarray, loss) -> np.ndarray:
    """Gradient of the average loss with respect to one coefficient group,
    evaluated at the current full prediction."""
    return psi.T @ loss.deriv(y, fit) / len(y)


@dataclass
class GamState:
    """Mutable solver state shared by the block and intercept updates.

    `fit` is the full current prediction (additive part plus any tree
    ensemble offset); `loss_mean` and `group_pen` cache the two objective
    pieces the additive updates can change.
    """

    y: np.ndarray
    loss: object
    lam1: float
    blocks: list[BasisMatrix]
    deltas: list[float]
    alphas: list[np.ndarray]
    alpha0: float = 0.0
    fit: np.ndarray = None
    loss_mean: float = 0.0
    group_pen: float = 0.0
    stalls: list[str] = field(default_factory=list)

    def objective_g(self) -> float:
        return self.loss_mean + penalty_term(self.lam1, self.group_pen)


def update_block(state: GamState, j: int) -> None:
    """One proximal gradient step on group j, halving the step until the
    penalized objective does not increase."""
    psi = state.blocks[j].values
    alpha = state.alphas[j]
    n = len(state.y)
    grad = psi.T @ state.loss.deriv(state.y, state.fit) / n
    base_norm = float(np.linalg.norm(alpha))
    obj_old = state.objective_g()
    delta = state.deltas[j]

    for _ in range(MAX_HALVINGS + 1):
        cand = group_prox(alpha - delta * grad, state.lam1 * delta)
        if np.array_equal(cand, alpha):
            return
        fit_new = state.fit + psi @ (cand - alpha)
        loss_new = state.loss.value_mean(state.y, fit_new)
        pen_new = state.group_pen - base_norm + float(np.linalg.norm(cand))
        obj_new = loss_new + penalty_term(state.lam1, pen_new)
        if obj_new <= obj_old + ACCEPT_SLACK * (1.0 + abs(obj_old)):
            state.alphas[j] = cand
            state.fit = fit_new
            state.loss_mean = loss_new
            state.group_pen = pen_new
            return
        delta /= 2.0
    state.stalls.append(f"backtracking exhausted on feature block {j}")


def update_intercept(state: GamState) -> None:
    """Gradient step on the intercept: step size 1/n (squared) or 1/(4n)
    (logistic) applied to the summed loss derivative, with the same
    backtracking guard as the blocks."""
    n = len(state.y)
    grad_sum = float(np.sum(state.loss.deriv(state.y, state.fit)))
    obj_old = state.objective_g()
    delta = state.loss.curvature / n

    for _ in range(MAX_HALVINGS + 1):
        shift = -delta * grad_sum
        if shift == 0.0:
            return
        fit_new = state.fit + shift
        loss_new = state.loss.value_mean(state.y, fit_new)
        obj_new = loss_new + penalty_term(state.lam1, state.group_pen)
        if obj_new <= obj_old + ACCEPT_SLACK * (1.0 + abs(obj_old)):
            state.alpha0 += shift
            state.fit = fit_new
            state.loss_mean = loss_new
            return
        delta /= 2.0
    state.stalls.append("backtracking exhausted on intercept")


def gam_pass(state: GamState) -> GamState:
    """One full Gauss-Seidel cycle: every group in ascending order, then the
    intercept.  With the lam1 = inf sentinel all groups stay at zero."""
    if not np.isinf(state.lam1):
        for j in range(len(state.blocks)):
            update_block(state, j)
    update_intercept(state)
    return state


@dataclass
class GamModel:
    """Fitted additive part: intercept, per-feature coefficient groups and
    their basis specs.  Inactive groups hold exact zero vectors."""

    alpha0: float
    specs: list[SplineSpec]
    coefs: list[np.ndarray]

    @property
    def feature_names(self) -> list[str]:
        return [s.feature for s in self.specs]

    def active_set(self) -> set[str]:
        return {s.feature for s, c in zip(self.specs, self.coefs)
                if float(np.linalg.norm(c)) > 0.0}

    @property
    def n_active(self) -> int:
        return len(self.active_set())


def pie_values(model: GamModel, x: np.ndarray) -> np.ndarray:
    """Per-feature contributions for one encoded row; zero for inactive
    groups, and mean zero over training rows by centering."""
    x = np.asarray(x, dtype=np.float64)
    out = np.zeros(len(model.specs))
    for i, (spec, coef) in enumerate(zip(model.specs, model.coefs)):
        if not np.any(coef):
            continue
        if spec.kind == "identity":
            raw = x[list(spec.columns)]
        else:
            raw = eval_basis(x[spec.columns[0]], spec)
        out[i] = float((raw - spec.offsets) @ coef)
    return out


def predict_gam(model: GamModel, x: np.ndarray) -> float:
    return model.alpha0 + float(np.sum(pie_values(model, x)))


def pie_values_matrix(model: GamModel, X: np.ndarray) -> np.ndarray:
    """Contributions for every row of an encoded matrix, shape (n, d)."""
    out = np.zeros((X.shape[0], len(model.specs)))
    for i, (spec, coef) in enumerate(zip(model.specs, model.coefs)):
        if not np.any(coef):
            continue
        out[:, i] = design_rows(X, spec) @ coef
    return out


def predict_gam_matrix(model: GamModel, X: np.ndarray) -> np.ndarray:
    return model.alpha0 + pie_values_matrix(model, X).sum(axis=1)
