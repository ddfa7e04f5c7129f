"""Gradient-boosted regression trees with a per-leaf penalty.

Each tree is grown best-first against pointwise negative gradients; leaf
weights minimize (1/n) * sum (r_i - w)^2 + lam2 * w^2, and every leaf also
charges a flat lam2, so the penalty shapes the structure as well as the
weights.  Trees are scaled by the shrinkage factor when appended, and the
stored ensemble keeps the scaled weights.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class RegressionTree:
    """Axis-aligned binary tree as parallel node arrays.

    `feature[i] == -1` marks node i as a leaf with value `weight[i]`.
    Routing sends a row left iff x[feature] < threshold; ties go right.
    """

    feature: list[int]
    threshold: list[float]
    left: list[int]
    right: list[int]
    weight: list[float]

    @property
    def n_leaves(self) -> int:
        return sum(1 for f in self.feature if f == -1)

    def depth(self) -> int:
        def walk(i):
            if self.feature[i] == -1:
                return 0
            return 1 + max(walk(self.left[i]), walk(self.right[i]))
        return walk(0)

    def leaf_weights(self) -> np.ndarray:
        return np.array([w for f, w in zip(self.feature, self.weight) if f == -1])

    def scaled(self, factor: float) -> "RegressionTree":
        return RegressionTree(
            feature=list(self.feature), threshold=list(self.threshold),
            left=list(self.left), right=list(self.right),
            weight=[w * factor for w in self.weight],
        )

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        out = np.empty(X.shape[0])
        stack = [(0, np.arange(X.shape[0]))]
        while stack:
            node, rows = stack.pop()
            if self.feature[node] == -1:
                out[rows] = self.weight[node]
                continue
            go_left = X[rows, self.feature[node]] < self.threshold[node]
            stack.append((self.left[node], rows[go_left]))
            stack.append((self.right[node], rows[~go_left]))
        return out

    def predict_row(self, x) -> float:
        x = np.asarray(x, dtype=np.float64)
        node = 0
        while self.feature[node] != -1:
            node = self.left[node] if x[self.feature[node]] < self.threshold[node] \
                else self.right[node]
        return self.weight[node]


@dataclass
class BoostModel:
    """Ordered tree ensemble; stored leaf weights already include shrinkage."""

    trees: list[RegressionTree] = field(default_factory=list)
    shrinkage: float = 0.1
    lam2: float = 0.0

    @property
    def n_trees(self) -> int:
        return len(self.trees)

    def penalty(self) -> float:
        """Sum over trees and leaves of (1 + w^2) on the stored weights."""
        total = 0.0
        for tree in self.trees:
            w = tree.leaf_weights()
            total += float(len(w) + np.sum(w * w))
        return total


def leaf_weight(residual_sum: float, leaf_count: int, n: int, lam2: float) -> float:
    """Minimizer of the penalized within-leaf objective."""
    if leaf_count < 1:
        raise ValueError("leaf must contain at least one row")
    return residual_sum / (leaf_count + n * lam2)


def _leaf_objective(sum_r, sum_r2, count, n, lam2):
    w = sum_r / (count + n * lam2)
    return (sum_r2 - 2.0 * w * sum_r + count * w * w) / n + lam2 * (1.0 + w * w)


def best_split(rows: np.ndarray, r: np.ndarray, X: np.ndarray, lam2: float,
               n: int, min_leaf: int = 1):
    """Exhaustive scan over features and midpoints between consecutive
    distinct values.  Returns (feature, threshold, gain) with the largest
    reduction in penalized objective, or None when no split improves on the
    parent leaf.  Ties break toward the lowest feature, then threshold.
    """
    rows = np.asarray(rows)
    m = rows.size
    if m < 2:
        return None
    rr = r[rows]
    total_s = float(rr.sum())
    total_q = float(rr @ rr)
    parent = _leaf_objective(total_s, total_q, m, n, lam2)
    # prefix-sum cancellation noise scales with the residual energy
    gain_floor = 1e-12 * (total_q / n + 1.0)

    best = None
    for f in range(X.shape[1]):
        x = X[rows, f]
        order = np.argsort(x, kind="stable")
        xs = x[order]
        cut = np.nonzero(xs[:-1] != xs[1:])[0]     # split after these positions
        if cut.size == 0:
            continue
        counts_l = cut + 1
        ok = (counts_l >= min_leaf) & (m - counts_l >= min_leaf)
        cut = cut[ok]
        if cut.size == 0:
            continue
        rs = rr[order]
        ps = np.cumsum(rs)
        pq = np.cumsum(rs * rs)
        cl = cut + 1.0
        sl, ql = ps[cut], pq[cut]
        sr, qr = total_s - sl, total_q - ql
        gain = parent - _leaf_objective(sl, ql, cl, n, lam2) \
                      - _leaf_objective(sr, qr, m - cl, n, lam2)
        i = int(np.argmax(gain))
        if gain[i] > gain_floor and (best is None or gain[i] > best[2]):
            lo, hi = xs[cut[i]], xs[cut[i] + 1]
            thr = lo + (hi - lo) / 2.0
            if not thr > lo:                        # midpoint rounded down to lo
                thr = hi
            best = (f, float(thr), float(gain[i]))
    return best


def fit_tree(r: np.ndarray, X: np.ndarray, lam2: float, max_leaves: int = 8,
             min_leaf: int = 5) -> RegressionTree:
    """Best-first growth: repeatedly split the leaf whose best split has the
    largest gain until max_leaves is reached or nothing improves."""
    n = len(r)
    all_rows = np.arange(n)

    feature = [-1]
    threshold = [0.0]
    left = [-1]
    right = [-1]
    weight = [leaf_weight(float(r.sum()), n, n, lam2)]
    # open leaves: (node id, row indices, cached best split or None)
    leaves = [(0, all_rows, best_split(all_rows, r, X, lam2, n, min_leaf))]

    while len(leaves) < max_leaves:
        pick = -1
        for i, (_, _, split) in enumerate(leaves):
            if split is None:
                continue
            if pick == -1 or split[2] > leaves[pick][2][2]:
                pick = i
        if pick == -1:
            break
        node, rows, (f, thr, _) = leaves.pop(pick)
        go_left = X[rows, f] < thr
        rows_l, rows_r = rows[go_left], rows[~go_left]

        ids = []
        for child_rows in (rows_l, rows_r):
            cid = len(feature)
            ids.append(cid)
            feature.append(-1)
            threshold.append(0.0)
            left.append(-1)
            right.append(-1)
            weight.append(leaf_weight(float(r[child_rows].sum()), len(child_rows), n, lam2))
            leaves.append((cid, child_rows,
                           best_split(child_rows, r, X, lam2, n, min_leaf)))
        feature[node] = f
        threshold[node] = thr
        left[node], right[node] = ids
        weight[node] = 0.0

    return RegressionTree(feature=feature, threshold=threshold,
                          left=left, right=right, weight=weight)


def append_tree(bm: BoostModel, tree: RegressionTree, nu: float) -> BoostModel:
    """New ensemble with the tree's weights scaled by the shrinkage factor."""
    if not 0.0 < nu <= 1.0:
        raise ValueError("shrinkage must be in (0, 1]")
    return BoostModel(trees=bm.trees + [tree.scaled(nu)],
                      shrinkage=bm.shrinkage, lam2=bm.lam2)


def predict_boost(bm: BoostModel, x) -> float:
    return sum(tree.predict_row(x) for tree in bm.trees)


def predict_boost_matrix(bm: BoostModel, X: np.ndarray) -> np.ndarray:
    out = np.zeros(X.shape[0])
    for tree in bm.trees:
        out += tree.predict(X)
    return out
