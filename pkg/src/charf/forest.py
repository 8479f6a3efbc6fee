"""Multi-output random forest over binary (one-hot) inputs.

Each target label is a categorical variable over {0, 1, 2}. Trees split on a
single binary input column (0 goes left, 1 goes right) and choose the split
minimising the size-weighted mean Gini impurity of the children, averaged
over all target labels. Leaves store raw class-count histograms per label;
prediction sums the histograms across trees and takes the argmax.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np
from numba import njit

from .genotype import N_CLASSES

FeaturesPerSplit = Union[int, str, None]


@dataclass(frozen=True)
class FitParams:
    n_trees: int = 10
    max_depth: int | None = None
    min_samples_split: int = 2
    features_per_split: FeaturesPerSplit = "sqrt"
    bootstrap: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1:
            raise ValueError("n_trees must be >= 1")
        if self.min_samples_split < 2:
            raise ValueError("min_samples_split must be >= 2")
        if self.max_depth is not None and self.max_depth < 0:
            raise ValueError("max_depth must be >= 0")
        fps = self.features_per_split
        if isinstance(fps, str) and fps != "sqrt":
            raise ValueError(f"unknown features_per_split {fps!r}")
        if isinstance(fps, int) and fps < 1:
            raise ValueError("features_per_split must be >= 1")

    def resolve_features(self, n_active: int) -> int:
        fps = self.features_per_split
        if n_active == 0:
            return 0
        if fps is None:
            return n_active
        if fps == "sqrt":
            return min(n_active, math.ceil(math.sqrt(n_active)))
        return min(n_active, int(fps))


def gini_multi(label_histograms) -> float:
    """Mean over labels of ``1 - sum_c (n_c / n)^2``."""
    h = np.asarray(label_histograms, dtype=float)
    if h.ndim == 1:
        h = h[None, :]
    if (h < 0).any():
        raise ValueError("histogram counts must be non-negative")
    totals = h.sum(axis=1)
    if (totals <= 0).any():
        raise ValueError("every label histogram needs a positive total")
    p = h / totals[:, None]
    return float(np.mean(1.0 - (p * p).sum(axis=1)))


@dataclass(eq=False)
class Tree:
    """Array-backed binary tree in preorder.

    ``feature[i] == -1`` marks a leaf. ``value[i]`` holds the per-label class
    counts of the training rows (with bootstrap multiplicity) reaching node i;
    only leaf values are used at prediction time.
    """

    feature: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    depth: np.ndarray

    @property
    def n_nodes(self) -> int:
        return int(self.feature.size)

    @property
    def n_leaves(self) -> int:
        return int((self.feature < 0).sum())

    @property
    def max_depth(self) -> int:
        return int(self.depth.max())

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf index reached by each row."""
        node = np.zeros(X.shape[0], dtype=np.intp)
        rows = np.arange(X.shape[0])
        active = self.feature[node] >= 0
        while active.any():
            r = rows[active]
            nd = node[r]
            go_right = X[r, self.feature[nd]] != 0
            node[r] = np.where(go_right, self.right[nd], self.left[nd])
            active[r] = self.feature[node[r]] >= 0
        return node

    def same_structure(self, other: "Tree") -> bool:
        return all(
            np.array_equal(getattr(self, name), getattr(other, name))
            for name in ("feature", "left", "right", "value")
        )

    def dump(self) -> str:
        """One node per line, preorder, indented by depth."""
        lines = []
        for i in range(self.n_nodes):
            pad = "  " * int(self.depth[i])
            if self.feature[i] < 0:
                hist = ";".join(",".join(str(int(c)) for c in lab) for lab in self.value[i])
                lines.append(f"{pad}{i} leaf {hist}")
            else:
                lines.append(f"{pad}{i} split x[{self.feature[i]}] L={self.left[i]} R={self.right[i]}")
        return "\n".join(lines)


@dataclass(eq=False)
class ForestModel:
    trees: list[Tree]
    input_width: int
    n_labels: int
    params: FitParams = field(default_factory=FitParams)

    @property
    def n_trees(self) -> int:
        return len(self.trees)

    def dump(self) -> str:
        parts = [f"forest n_trees={self.n_trees} input_width={self.input_width} n_labels={self.n_labels}"]
        for t, tree in enumerate(self.trees):
            parts.append(f"tree {t}")
            parts.append(tree.dump())
        return "\n".join(parts)


@njit(cache=True)
def _grow(X, Y, rows, perms, n_cand, min_split, max_depth):
    """Grow one tree over the (possibly repeated) row indices ``rows``.

    ``perms[k]`` is the candidate-column order for the k-th node that attempts
    a split. Rows of a node occupy a contiguous segment of ``idx``.
    """
    n = rows.size
    L = Y.shape[1]
    cap = 2 * n
    feature = np.full(cap, -1, np.int64)
    left = np.full(cap, -1, np.int64)
    right = np.full(cap, -1, np.int64)
    depth = np.zeros(cap, np.int64)
    value = np.zeros((cap, L, 3), np.int64)
    idx = rows.copy()
    tmp = np.empty(n, np.int64)
    st_start = np.empty(cap, np.int64)
    st_end = np.empty(cap, np.int64)
    st_depth = np.empty(cap, np.int64)
    st_parent = np.empty(cap, np.int64)
    st_right = np.empty(cap, np.int64)
    rc = np.zeros((L, 3), np.int64)
    n_active = perms.shape[1]

    st_start[0] = 0
    st_end[0] = n
    st_depth[0] = 0
    st_parent[0] = -1
    st_right[0] = 0
    sp = 1
    n_nodes = 0
    attempt = 0
    while sp > 0:
        sp -= 1
        s = st_start[sp]
        e = st_end[sp]
        d = st_depth[sp]
        parent = st_parent[sp]
        node = n_nodes
        n_nodes += 1
        if parent >= 0:
            if st_right[sp] == 1:
                right[parent] = node
            else:
                left[parent] = node
        depth[node] = d
        for i in range(s, e):
            r = idx[i]
            for l in range(L):
                value[node, l, Y[r, l]] += 1

        m = e - s
        pure = True
        for l in range(L):
            nz = 0
            for c in range(3):
                if value[node, l, c] > 0:
                    nz += 1
            if nz > 1:
                pure = False
                break
        if pure or m < min_split or (max_depth >= 0 and d >= max_depth) or n_cand == 0:
            continue

        perm = perms[attempt]
        attempt += 1
        best_f = -1
        best_score = np.inf
        start = 0
        while start < n_active and best_f < 0:
            stop = min(start + n_cand, n_active)
            cand = np.sort(perm[start:stop])
            for f in cand:
                nr = 0
                rc[:, :] = 0
                for i in range(s, e):
                    r = idx[i]
                    if X[r, f] != 0:
                        nr += 1
                        for l in range(L):
                            rc[l, Y[r, l]] += 1
                if nr == 0 or nr == m:
                    continue
                sq_r = 0
                sq_l = 0
                for l in range(L):
                    for c in range(3):
                        a = rc[l, c]
                        b = value[node, l, c] - a
                        sq_r += a * a
                        sq_l += b * b
                score = -(sq_l / (m - nr) + sq_r / nr)
                if score < best_score:
                    best_score = score
                    best_f = f
            start = stop
        if best_f < 0:
            continue

        feature[node] = best_f
        lo = s
        k = 0
        for i in range(s, e):
            r = idx[i]
            if X[r, best_f] == 0:
                idx[lo] = r
                lo += 1
            else:
                tmp[k] = r
                k += 1
        for i in range(k):
            idx[lo + i] = tmp[i]
        # right pushed first so the left subtree is numbered first (preorder)
        st_start[sp] = lo
        st_end[sp] = e
        st_depth[sp] = d + 1
        st_parent[sp] = node
        st_right[sp] = 1
        sp += 1
        st_start[sp] = s
        st_end[sp] = lo
        st_depth[sp] = d + 1
        st_parent[sp] = node
        st_right[sp] = 0
        sp += 1

    return (
        feature[:n_nodes].copy(),
        left[:n_nodes].copy(),
        right[:n_nodes].copy(),
        value[:n_nodes].copy(),
        depth[:n_nodes].copy(),
    )


def draw_tree_randomness(n_rows: int, active: np.ndarray, bootstrap: bool, rng: np.random.Generator):
    """Bootstrap rows and per-node candidate orders for one tree.

    At most ``2 * n_rows - 1`` nodes exist, so that many orders are drawn.
    """
    rows = rng.integers(0, n_rows, size=n_rows) if bootstrap else np.arange(n_rows)
    n_nodes = max(2 * n_rows - 1, 1)
    if active.size:
        keys = rng.random((n_nodes, active.size))
        perms = active[np.argsort(keys, axis=1, kind="stable")]
    else:
        perms = np.zeros((n_nodes, 0), dtype=np.int64)
    return rows.astype(np.int64), perms.astype(np.int64)


def _build_tree(X, Y, active, n_candidates, params, rng) -> Tree:
    rows, perms = draw_tree_randomness(X.shape[0], active, params.bootstrap, rng)
    max_depth = -1 if params.max_depth is None else params.max_depth
    feature, left, right, value, depth = _grow(
        X, Y, rows, perms, n_candidates, params.min_samples_split, max_depth
    )
    return Tree(feature=feature, left=left, right=right, value=value, depth=depth)


def fit(X: np.ndarray, Y: np.ndarray, params: FitParams | None = None) -> ForestModel:
    """Fit a multi-output forest on binary inputs ``X`` and class targets ``Y``.

    Each tree draws its own generator from ``(params.seed, tree_index)``.
    Columns that are constant over the whole training set are never split on
    and do not count towards ``features_per_split``.
    """
    params = params or FitParams()
    X = np.asarray(X)
    Y = np.asarray(Y)
    if Y.ndim == 1:
        Y = Y[:, None]
    if X.ndim != 2:
        raise ValueError("X must be 2-D")
    if X.shape[0] != Y.shape[0]:
        raise ValueError(f"X has {X.shape[0]} rows but Y has {Y.shape[0]}")
    if X.shape[0] == 0:
        raise ValueError("empty training set")
    if ((Y < 0) | (Y >= N_CLASSES)).any():
        raise ValueError("targets must be classes 0, 1 or 2 (no MISSING)")
    if ((X != 0) & (X != 1)).any():
        raise ValueError("inputs must be binary")

    X = np.ascontiguousarray(X, dtype=np.uint8)
    Y = np.ascontiguousarray(Y, dtype=np.int8)
    n_labels = Y.shape[1]
    col_sum = X.sum(axis=0, dtype=np.int64)
    active = np.flatnonzero((col_sum > 0) & (col_sum < X.shape[0]))
    n_candidates = params.resolve_features(active.size)

    trees = [
        _build_tree(X, Y, active, n_candidates, params, np.random.default_rng([params.seed, t]))
        for t in range(params.n_trees)
    ]
    return ForestModel(trees=trees, input_width=X.shape[1], n_labels=n_labels, params=params)


def predict_counts(model: ForestModel, X: np.ndarray) -> np.ndarray:
    """Summed leaf histograms, shape ``(n_rows, n_labels, 3)``."""
    X = np.asarray(X)
    if X.ndim != 2 or X.shape[1] != model.input_width:
        raise ValueError(f"expected input width {model.input_width}, got shape {X.shape}")
    out = np.zeros((X.shape[0], model.n_labels, N_CLASSES), dtype=np.int64)
    for tree in model.trees:
        out += tree.value[tree.apply(X)]
    return out


def predict(model: ForestModel, X: np.ndarray) -> np.ndarray:
    """Per-label argmax of the summed histograms; ties go to the smaller class."""
    return predict_counts(model, X).argmax(axis=2).astype(np.int8)
