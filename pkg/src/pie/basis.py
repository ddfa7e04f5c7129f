"""Per-feature spline basis expansions and the design matrices they induce.

Numeric features get degree-3 B-spline bases with interior knots at
empirical quantiles; binary and one-hot columns fall back to the identity
basis.  Design columns are centered on the training split so the intercept
absorbs the target mean, and each block caches the largest eigenvalue of
its Gram matrix for the solver's step sizes.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

EIG_FLOOR = 1e-12
POWER_TOL = 1e-8


@dataclass
class SplineSpec:
    """Basis description for one feature group.

    For a numeric feature, `columns` holds its single encoded column and the
    basis is a B-spline expansion (or identity when degenerate).  For a
    categorical feature, `columns` holds all of its one-hot columns and the
    basis is the identity on each, so the group has one basis function per
    category.
    """

    feature: str
    columns: tuple[int, ...]
    kind: str                            # "bspline" | "identity"
    degree: int = 3
    knots: np.ndarray | None = None      # full vector incl. repeated boundary knots
    offsets: np.ndarray | None = None    # training column means, set by build_design

    def __post_init__(self):
        if self.kind not in ("bspline", "identity"):
            raise ValueError(f"unknown basis kind {self.kind!r}")
        if self.kind == "bspline":
            if self.knots is None or len(self.columns) != 1:
                raise ValueError("bspline basis needs a knot vector and a single column")
            self.knots = np.asarray(self.knots, dtype=np.float64)
            if np.any(np.diff(self.knots) < 0):
                raise ValueError("knot vector must be non-decreasing")

    @property
    def n_basis(self) -> int:
        if self.kind == "identity":
            return len(self.columns)
        return len(self.knots) - self.degree - 1


@dataclass
class BasisMatrix:
    """Centered design block for one feature, with its Gram eigenvalue cached."""

    spec: SplineSpec
    values: np.ndarray       # n x K, column means zero over training rows
    lam_max: float           # largest eigenvalue of values' @ values


def make_knots(values, n_interior: int, degree: int) -> np.ndarray:
    """Knot vector with interior knots at equally spaced quantiles of the
    distinct values and boundary knots repeated degree+1 times.

    If there are too few distinct values to place the requested interior
    knots, the count is reduced and a warning is emitted.
    """
    if n_interior < 0:
        raise ValueError("n_interior must be non-negative")
    distinct = np.unique(np.asarray(values, dtype=np.float64))
    if distinct.size < 2:
        raise ValueError("need at least 2 distinct values for a spline basis")
    if distinct.size < n_interior + 2:
        reduced = distinct.size - 2
        warnings.warn(
            f"only {distinct.size} distinct values: reducing interior knots "
            f"from {n_interior} to {reduced}"
        )
        n_interior = reduced
    lo, hi = distinct[0], distinct[-1]
    if n_interior > 0:
        qs = np.arange(1, n_interior + 1) / (n_interior + 1)
        interior = np.quantile(distinct, qs)
    else:
        interior = np.empty(0)
    return np.concatenate([np.full(degree + 1, lo), interior, np.full(degree + 1, hi)])


def make_spline_spec(values, feature: str, columns, n_interior: int = 4,
                     degree: int = 3) -> SplineSpec:
    """Build the basis spec for one feature group.

    Multi-column (one-hot) groups and columns with at most two distinct
    values get the identity basis; everything else gets a B-spline basis.
    """
    columns = tuple(columns)
    if len(columns) > 1:
        return SplineSpec(feature=feature, columns=columns, kind="identity")
    distinct = np.unique(np.asarray(values, dtype=np.float64))
    if distinct.size <= 2:
        return SplineSpec(feature=feature, columns=columns, kind="identity")
    return SplineSpec(
        feature=feature, columns=columns, kind="bspline", degree=degree,
        knots=make_knots(values, n_interior, degree),
    )


def _bspline_design(x: np.ndarray, knots: np.ndarray, degree: int) -> np.ndarray:
    """Evaluate all B-spline basis functions at each point (Cox-de Boor).

    Points are clamped to the knot range first, so the basis sums to one
    everywhere and out-of-range prediction inputs behave like the nearest
    boundary.
    """
    p = degree
    n_basis = len(knots) - p - 1
    x = np.clip(np.asarray(x, dtype=np.float64), knots[0], knots[-1])
    span = np.searchsorted(knots, x, side="right") - 1
    span = np.clip(span, p, len(knots) - p - 2)

    n = x.shape[0]
    tri = np.zeros((n, p + 1))
    tri[:, 0] = 1.0
    left = np.empty((n, p + 1))
    right = np.empty((n, p + 1))
    for j in range(1, p + 1):
        left[:, j] = x - knots[span + 1 - j]
        right[:, j] = knots[span + j] - x
        saved = np.zeros(n)
        for r in range(j):
            denom = right[:, r + 1] + left[:, j - r]
            temp = tri[:, r] / denom
            tri[:, r] = saved + right[:, r + 1] * temp
            saved = left[:, j - r] * temp
        tri[:, j] = saved

    out = np.zeros((n, n_basis))
    cols = span[:, None] - p + np.arange(p + 1)[None, :]
    out[np.arange(n)[:, None], cols] = tri
    return out


def eval_basis(x, spec: SplineSpec) -> np.ndarray:
    """Uncentered basis values for one input; scalar for a single-column
    spec, a length-len(columns) vector for a one-hot group."""
    if spec.kind == "identity":
        return np.atleast_1d(np.asarray(x, dtype=np.float64)).copy()
    return _bspline_design(np.atleast_1d(x), spec.knots, spec.degree)[0]


def design_rows(X: np.ndarray, spec: SplineSpec, centered: bool = True) -> np.ndarray:
    """Basis rows for a whole encoded matrix, minus the stored offsets."""
    if spec.kind == "identity":
        vals = X[:, list(spec.columns)]
    else:
        vals = _bspline_design(X[:, spec.columns[0]], spec.knots, spec.degree)
    if centered:
        if spec.offsets is None:
            raise ValueError(f"spec for {spec.feature!r} has no centering offsets yet")
        vals = vals - spec.offsets
    return vals


def _power_lambda_max(gram: np.ndarray, tol: float = POWER_TOL,
                      max_iter: int = 10_000) -> float:
    """Largest eigenvalue of a symmetric PSD matrix by power iteration."""
    k = gram.shape[0]
    v = np.full(k, 1.0 / np.sqrt(k))
    lam = 0.0
    for _ in range(max_iter):
        w = gram @ v
        norm = np.linalg.norm(w)
        if norm == 0.0:
            return 0.0
        v = w / norm
        new_lam = float(v @ gram @ v)
        if abs(new_lam - lam) <= tol * max(abs(new_lam), 1e-300):
            return new_lam
        lam = new_lam
    return lam


def build_design(ds, specs: list[SplineSpec]) -> list[BasisMatrix]:
    """Evaluate every basis on the training rows, center the columns, and
    cache each block's Gram eigenvalue.

    Centering offsets are written back into the specs so prediction-time
    rows reproduce the training design exactly.
    """
    blocks = []
    for spec in specs:
        raw = design_rows(ds.X, spec, centered=False)
        spec.offsets = raw.mean(axis=0)
        centered = raw - spec.offsets
        gram = centered.T @ centered
        blocks.append(BasisMatrix(spec=spec, values=centered,
                                  lam_max=_power_lambda_max(gram)))
    return blocks


def block_lipschitz(block: BasisMatrix, curvature: float, n: int) -> float:
    """Curvature bound (M/n) * lambda_max for one block; floored to avoid
    zero step-size denominators on all-zero blocks."""
    return max((curvature / n) * block.lam_max, EIG_FLOOR)
