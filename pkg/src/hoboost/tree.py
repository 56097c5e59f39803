"""Exact greedy regression trees driven by order-k gradient statistics."""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numba
import numpy as np

from .data import Dataset, as_rowset
from .leaf_solver import (
    DegenerateDenominatorError,
    GradStats,
    SolverConfig,
    score_kernel,
)
from .losses import GradBundle

LEAF = -1


@dataclass(frozen=True, eq=False)
class Tree:
    """Binary tree in flat preorder arrays; node 0 is the root.

    ``feature[i] == -1`` marks a leaf. A row goes left when
    ``x[feature] < threshold``, ties go right.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    weight: np.ndarray
    row_count: np.ndarray

    def __post_init__(self):
        arrays = {
            "feature": np.asarray(self.feature, dtype=np.int64),
            "threshold": np.asarray(self.threshold, dtype=np.float64),
            "left": np.asarray(self.left, dtype=np.int64),
            "right": np.asarray(self.right, dtype=np.int64),
            "weight": np.asarray(self.weight, dtype=np.float64),
            "row_count": np.asarray(self.row_count, dtype=np.int64),
        }
        n = arrays["feature"].size
        if n == 0 or any(a.shape != (n,) for a in arrays.values()):
            raise ValueError("tree arrays must be non-empty and of equal length")
        for name, a in arrays.items():
            a.setflags(write=False)
            object.__setattr__(self, name, a)
        leaves = self.feature == LEAF
        if not np.all(np.isfinite(self.weight[leaves])):
            raise ValueError("leaf weights must be finite")
        splits = ~leaves
        for child in (self.left[splits], self.right[splits]):
            if np.any((child <= 0) | (child >= n)):
                raise ValueError("split node child index out of range")
        if not np.all(np.isfinite(self.threshold[splits])):
            raise ValueError("split thresholds must be finite")

    @classmethod
    def leaf(cls, weight: float, row_count: int = 0) -> "Tree":
        return cls([LEAF], [0.0], [LEAF], [LEAF], [weight], [row_count])

    @property
    def n_nodes(self) -> int:
        return self.feature.size

    @property
    def n_leaves(self) -> int:
        return int(np.count_nonzero(self.feature == LEAF))

    @property
    def depth(self) -> int:
        depths = np.zeros(self.n_nodes, dtype=np.int64)
        for i in range(self.n_nodes):
            if self.feature[i] != LEAF:
                depths[self.left[i]] = depths[i] + 1
                depths[self.right[i]] = depths[i] + 1
        return int(depths.max())

    def is_leaf(self, node: int) -> bool:
        return self.feature[node] == LEAF

    def leaf_weights(self) -> np.ndarray:
        return self.weight[self.feature == LEAF]


@dataclass(frozen=True)
class SplitDecision:
    feature: int
    threshold: float
    gain: float
    left_stats: GradStats
    right_stats: GradStats


class GrowResult(NamedTuple):
    tree: Tree
    leaf_of_row: np.ndarray  # node id per dataset row, -1 for rows outside the root set
    n_fallbacks: int


# ---------------------------------------------------------------- kernels

# relative size of score rounding noise below which two split gains tie
GAIN_TIE_RTOL = 1e-12


@numba.njit(cache=True)
def _node_stats(g, rows):
    out = np.zeros(4)
    K = g.shape[0]
    for i in range(rows.size):
        r = rows[i]
        for k in range(K):
            out[k] += g[k, r]
    return out


@numba.njit(cache=True)
def _midpoint(a, b):
    mid = 0.5 * a + 0.5 * b
    # adjacent floats can round the midpoint down onto a
    if not mid > a:
        mid = b
    return mid


@numba.njit(cache=True)
def _scan_node(
    columns, sorted_rows, g, node, node_score,
    lam, order, cubic_mode, trust_alpha, formula, min_child_rows, min_gain,
):
    """Best split of one node; best_feature is -1 when nothing beats min_gain.

    ``sorted_rows[f]`` holds the node's rows in ascending order of feature
    ``f``; ``g`` is row-major ``(n_rows, order)``. Left sums accumulate left to right; right sums are node - left.
    """
    n_features, nn = sorted_rows.shape
    K = g.shape[1]
    best_feature = -1
    best_threshold = 0.0
    best_gain = min_gain
    best_left = np.zeros(4)
    left = np.zeros(4)
    for f in range(n_features):
        rows = sorted_rows[f]
        x = columns[f]
        left[:] = 0.0
        for i in range(nn - 1):
            r = rows[i]
            for k in range(K):
                left[k] += g[r, k]
            n_left = i + 1
            a = x[r]
            b = x[rows[i + 1]]
            if a == b:
                continue
            if n_left < min_child_rows or nn - n_left < min_child_rows:
                continue
            sl = score_kernel(
                left[0], left[1], left[2], left[3],
                lam, order, cubic_mode, trust_alpha, formula,
            )[0]
            sr = score_kernel(
                node[0] - left[0], node[1] - left[1], node[2] - left[2], node[3] - left[3],
                lam, order, cubic_mode, trust_alpha, formula,
            )[0]
            gain = sl + sr - node_score
            # equal row partitions reached through different sort orders differ
            # only by rounding; such near-ties keep the earlier candidate
            if best_feature >= 0:
                better = gain > best_gain + GAIN_TIE_RTOL * (abs(sl) + abs(sr) + abs(node_score))
            else:
                better = gain > min_gain
            if better:
                best_gain = gain
                best_feature = f
                best_threshold = _midpoint(a, b)
                best_left[:] = left
    return best_feature, best_threshold, best_gain, best_left


@numba.njit(cache=True)
def _partition(sorted_rows, go_left, n_left):
    """Stable split of every feature's sorted row list into left and right."""
    m, nn = sorted_rows.shape
    left = np.empty((m, n_left), dtype=np.int64)
    right = np.empty((m, nn - n_left), dtype=np.int64)
    for f in range(m):
        li = 0
        ri = 0
        for i in range(nn):
            r = sorted_rows[f, i]
            if go_left[r]:
                left[f, li] = r
                li += 1
            else:
                right[f, ri] = r
                ri += 1
    return left, right


# ---------------------------------------------------------------- helpers


def _sorted_rows_for(dataset: Dataset, rows: np.ndarray) -> np.ndarray:
    mask = np.zeros(dataset.n_rows, dtype=bool)
    mask[rows] = True
    keep = mask[dataset.sort_index]
    return dataset.sort_index[keep].reshape(dataset.n_features, rows.size)


def _check_inputs(dataset: Dataset, grads: GradBundle, config: SolverConfig):
    if grads.n_rows != dataset.n_rows:
        raise ValueError("gradient bundle does not cover the dataset rows")
    if grads.order < config.order:
        raise ValueError(f"order-{config.order} solver needs {config.order} derivatives")


def _stats(vec, count) -> GradStats:
    return GradStats(float(vec[0]), float(vec[1]), float(vec[2]), float(vec[3]), int(count))


def _node_score(vec, codes):
    try:
        return score_kernel(vec[0], vec[1], vec[2], vec[3], *codes)
    except ValueError as exc:
        raise DegenerateDenominatorError(str(exc)) from None


def _scan(dataset, sorted_rows, g_rows, vec, node_score, codes, min_child_rows, min_gain):
    try:
        return _scan_node(
            dataset.columns, sorted_rows, g_rows, vec, node_score,
            *codes, int(min_child_rows), float(min_gain),
        )
    except ValueError as exc:
        raise DegenerateDenominatorError(str(exc)) from None


# ---------------------------------------------------------------- operations


def find_best_split(
    dataset: Dataset,
    rows,
    grads: GradBundle,
    config: SolverConfig,
    min_child_rows: int = 1,
    min_gain: float = 0.0,
) -> SplitDecision | None:
    """Scan every feature of the node in sorted order and return the best split.

    Candidate thresholds are midpoints between consecutive distinct values.
    A split must have gain strictly above ``min_gain``; ties go to the lower
    feature index, then the lower threshold. Gains within rounding noise
    (``GAIN_TIE_RTOL`` of the scores involved) count as ties.
    """
    _check_inputs(dataset, grads, config)
    rows = np.sort(as_rowset(rows, dataset.n_rows))
    if rows.size == 0:
        raise ValueError("row set is empty")
    g = grads.g[: config.order]
    codes = config.codes
    vec = _node_stats(g, rows)
    node_score = _node_score(vec, codes)[0]
    f, thr, gain, left = _scan(
        dataset, _sorted_rows_for(dataset, rows), np.ascontiguousarray(g.T), vec, node_score,
        codes, min_child_rows, min_gain,
    )
    if f < 0:
        return None
    n_left = int(np.count_nonzero(dataset.columns[f, rows] < thr))
    return SplitDecision(
        feature=int(f),
        threshold=float(thr),
        gain=float(gain),
        left_stats=_stats(left, n_left),
        right_stats=_stats(vec - left, rows.size - n_left),
    )


def grow_tree(
    dataset: Dataset,
    rows,
    grads: GradBundle,
    config: SolverConfig,
    max_depth: int = 6,
    min_child_rows: int = 1,
    min_gain: float = 0.0,
) -> GrowResult:
    """Grow a tree depth-first (preorder node ids) and report where each row landed.

    Children inherit the parent's per-feature sorted order through a stable
    filter, so nothing is re-sorted below the root.
    """
    if max_depth < 0:
        raise ValueError("max_depth must be >= 0")
    _check_inputs(dataset, grads, config)
    rows = np.sort(as_rowset(rows, dataset.n_rows))
    if rows.size == 0:
        raise ValueError("row set is empty")
    g = grads.g[: config.order]
    codes = config.codes
    g_rows = np.ascontiguousarray(g.T)
    columns = dataset.columns

    feature, threshold, left, right, weight, count = [], [], [], [], [], []
    leaf_of_row = np.full(dataset.n_rows, LEAF, dtype=np.int64)
    n_fallbacks = 0

    def new_node():
        for arr, val in ((feature, LEAF), (threshold, 0.0), (left, LEAF),
                         (right, LEAF), (weight, 0.0), (count, 0)):
            arr.append(val)
        return len(feature) - 1

    def grow(node_rows, sorted_rows, depth):
        nonlocal n_fallbacks
        node_id = new_node()
        count[node_id] = node_rows.size
        vec = _node_stats(g, node_rows)
        score, w, fb = _node_score(vec, codes)
        f = LEAF
        if depth < max_depth and node_rows.size >= 2:
            f, thr, _, _ = _scan(
                dataset, sorted_rows, g_rows, vec, score, codes, min_child_rows, min_gain
            )
        if f < 0:
            weight[node_id] = w
            leaf_of_row[node_rows] = node_id
            n_fallbacks += int(fb)
            return node_id
        go_left = columns[f] < thr
        in_left = go_left[node_rows]
        left_rows = node_rows[in_left]
        left_sorted, right_sorted = _partition(sorted_rows, go_left, left_rows.size)
        feature[node_id] = int(f)
        threshold[node_id] = float(thr)
        left[node_id] = grow(left_rows, left_sorted, depth + 1)
        right[node_id] = grow(node_rows[~in_left], right_sorted, depth + 1)
        return node_id

    grow(rows, _sorted_rows_for(dataset, rows), 0)
    tree = Tree(feature, threshold, left, right, weight, count)
    return GrowResult(tree, leaf_of_row, n_fallbacks)


def build_tree(
    dataset: Dataset,
    rows,
    grads: GradBundle,
    config: SolverConfig,
    max_depth: int = 6,
    min_child_rows: int = 1,
    min_gain: float = 0.0,
) -> Tree:
    return grow_tree(dataset, rows, grads, config, max_depth, min_child_rows, min_gain).tree


def predict_tree(tree: Tree, features) -> float:
    """Leaf weight reached by a single feature vector."""
    x = np.asarray(features, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite feature value")
    node = 0
    while tree.feature[node] != LEAF:
        f = tree.feature[node]
        if f >= x.size:
            raise ValueError(f"tree splits on feature {f} but input has {x.size} features")
        node = tree.left[node] if x[f] < tree.threshold[node] else tree.right[node]
    return float(tree.weight[node])


def apply_tree(tree: Tree, columns: np.ndarray) -> np.ndarray:
    """Leaf id for every column of a ``(n_features, n_rows)`` matrix."""
    n = columns.shape[1]
    node = np.zeros(n, dtype=np.int64)
    cols = np.arange(n)
    active = tree.feature[node] != LEAF
    while np.any(active):
        f = tree.feature[node]
        x = columns[np.where(active, f, 0), cols]
        nxt = np.where(x < tree.threshold[node], tree.left[node], tree.right[node])
        node = np.where(active, nxt, node)
        active = tree.feature[node] != LEAF
    return node


def predict_tree_batch(tree: Tree, columns: np.ndarray) -> np.ndarray:
    return tree.weight[apply_tree(tree, columns)]
