"""CART random forest with explicit leaf bookkeeping.

Trees are grown to purity by default (unbounded depth, one sample per
leaf), so every leaf reached by training data identifies a cell of the
forest's feature-space partition. Induction is plain CART: Gini
impurity, bootstrap resampling per tree, sqrt(d) feature subsampling
per split. Leaf ids are node indices, unique within each tree.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from joblib import Parallel, delayed

from .data import Dataset
from .errors import InvalidInputError
from .signatures import FOREST, MembershipSignature

_LEAF = -1


@dataclass
class ForestConfig:
    tree_count: int = 500
    max_depth: int | None = None
    min_samples_leaf: int = 1
    max_features: int | str = "sqrt"
    bootstrap: bool = True
    n_jobs: int = 1

    @classmethod
    def desk(cls, tree_count: int = 100) -> "ForestConfig":
        """Small preset for tests and quick experiments."""
        return cls(tree_count=tree_count)


@dataclass
class DecisionTree:
    """Array-encoded binary tree. feature[i] == -1 marks node i as a leaf."""

    children_left: np.ndarray
    children_right: np.ndarray
    feature: np.ndarray
    threshold: np.ndarray
    leaf_counts: np.ndarray  # (node_count, K) class histogram, zero rows internal

    @property
    def node_count(self) -> int:
        return self.feature.shape[0]

    def leaf_ids(self) -> np.ndarray:
        return np.flatnonzero(self.feature == _LEAF)

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf id reached by each row of X. Routing: go left iff x[f] <= threshold."""
        X = np.asarray(X, dtype=np.float64)
        node = np.zeros(X.shape[0], dtype=np.int64)
        while True:
            feat = self.feature[node]
            active = np.flatnonzero(feat != _LEAF)
            if active.size == 0:
                return node
            cur = node[active]
            go_left = X[active, self.feature[cur]] <= self.threshold[cur]
            node[active] = np.where(go_left, self.children_left[cur], self.children_right[cur])

    def leaf_posteriors(self, leaf: np.ndarray) -> np.ndarray:
        counts = self.leaf_counts[leaf].astype(np.float64)
        return counts / counts.sum(axis=1, keepdims=True)


def _scan_feature(v, yn, class_count, min_samples_leaf):
    """Best Gini split on one feature; returns (score, threshold) or (None, None).

    score = sum_k left_k^2/n_L + sum_k right_k^2/n_R, equivalent to
    minimizing the weighted child Gini impurity.
    """
    order = np.argsort(v, kind="stable")
    vs = v[order]
    ys = yn[order]
    m = vs.shape[0]
    ok = vs[1:] > vs[:-1]
    if min_samples_leaf > 1:
        n_left = np.arange(1, m)
        ok = ok & (n_left >= min_samples_leaf) & (m - n_left >= min_samples_leaf)
    if not ok.any():
        return None, None
    cum = (ys[:, None] == np.arange(class_count)[None, :]).cumsum(axis=0)
    left = cum[:-1].astype(np.float64)
    total = cum[-1].astype(np.float64)
    n_left = np.arange(1, m, dtype=np.float64)
    score = (left**2).sum(axis=1) / n_left + ((total - left) ** 2).sum(axis=1) / (m - n_left)
    score[~ok] = -np.inf
    i = int(np.argmax(score))
    thr = vs[i] + 0.5 * (vs[i + 1] - vs[i])
    if thr >= vs[i + 1]:  # midpoint rounded up to the right value
        thr = vs[i]
    return float(score[i]), float(thr)


def _best_split(Xn, yn, class_count, rng, max_features, min_samples_leaf):
    """Scan features in random order; keep scanning past max_features until a
    valid split is found so that nodes never go impure for lack of candidates."""
    best_score, best_feat, best_thr = -np.inf, None, None
    tried = 0
    for f in rng.permutation(Xn.shape[1]):
        v = Xn[:, f]
        if v[0] == v[-1] and (v == v[0]).all():
            continue
        score, thr = _scan_feature(v, yn, class_count, min_samples_leaf)
        tried += 1
        if score is not None and score > best_score:
            best_score, best_feat, best_thr = score, int(f), thr
        if tried >= max_features and best_feat is not None:
            break
    if best_feat is None:
        return None
    return best_feat, best_thr


def _grow_tree(X, y, class_count, rng, max_depth, min_samples_leaf, max_features):
    children_left, children_right = [], []
    feature, threshold, counts = [], [], []

    def alloc():
        children_left.append(_LEAF)
        children_right.append(_LEAF)
        feature.append(_LEAF)
        threshold.append(np.nan)
        counts.append(None)
        return len(feature) - 1

    root = alloc()
    stack = [(np.arange(y.shape[0]), 0, root)]
    while stack:
        idx, depth, nid = stack.pop()
        labels = y[idx]
        hist = np.bincount(labels, minlength=class_count)
        pure = hist.max() == idx.shape[0]
        depth_capped = max_depth is not None and depth >= max_depth
        if pure or depth_capped or idx.shape[0] < 2 * min_samples_leaf:
            counts[nid] = hist
            continue
        split = _best_split(X[idx], labels, class_count, rng, max_features, min_samples_leaf)
        if split is None:
            counts[nid] = hist
            continue
        f, thr = split
        go_left = X[idx, f] <= thr
        left, right = alloc(), alloc()
        feature[nid] = f
        threshold[nid] = thr
        children_left[nid] = left
        children_right[nid] = right
        counts[nid] = np.zeros(class_count, dtype=np.int64)
        stack.append((idx[~go_left], depth + 1, right))
        stack.append((idx[go_left], depth + 1, left))

    return DecisionTree(
        children_left=np.array(children_left, dtype=np.int64),
        children_right=np.array(children_right, dtype=np.int64),
        feature=np.array(feature, dtype=np.int64),
        threshold=np.array(threshold, dtype=np.float64),
        leaf_counts=np.vstack(counts).astype(np.int64),
    )


def _resolve_max_features(spec, d):
    if spec == "sqrt":
        return max(1, int(np.sqrt(d)))
    if spec == "all" or spec is None:
        return d
    k = int(spec)
    if not 1 <= k <= d:
        raise InvalidInputError(f"max_features must be in [1, {d}], got {spec!r}")
    return k


def _fit_one_tree(X, y, class_count, seed_seq, config, max_features):
    rng = np.random.default_rng(seed_seq)
    n = y.shape[0]
    if config.bootstrap:
        idx = rng.integers(0, n, size=n)
        Xb, yb = X[idx], y[idx]
    else:
        Xb, yb = X, y
    return _grow_tree(
        Xb, yb, class_count, rng, config.max_depth, config.min_samples_leaf, max_features
    )


@dataclass
class ForestModel:
    """Trained forest; immutable after fit, safe to share across threads."""

    trees: list[DecisionTree]
    tree_count: int
    class_count: int
    feature_count: int
    seed: int = 0
    config: ForestConfig = field(default_factory=ForestConfig)

    def apply(self, X: np.ndarray) -> np.ndarray:
        """(n, T) matrix of leaf ids."""
        X = _check_points(X, self.feature_count)
        return np.column_stack([t.apply(X) for t in self.trees])

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        X = _check_points(X, self.feature_count)
        acc = np.zeros((X.shape[0], self.class_count))
        for t in self.trees:
            acc += t.leaf_posteriors(t.apply(X))
        return acc / self.tree_count

    def predict(self, X: np.ndarray) -> np.ndarray:
        return np.argmax(self.predict_proba(X), axis=1)

    def signature(self, x: np.ndarray) -> MembershipSignature:
        return forest_signature(self, x)

    def signatures(self, X: np.ndarray) -> list[MembershipSignature]:
        return forest_signatures(self, X)


def _check_points(X, d):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != d:
        raise InvalidInputError(f"expected points of dimension {d}, got shape {X.shape}")
    if not np.isfinite(X).all():
        raise InvalidInputError("points contain non-finite values")
    return X


def train_forest(data: Dataset, config: ForestConfig | None = None, seed: int = 0) -> ForestModel:
    """Fit a random forest; deterministic given (data, config, seed).

    Per-tree randomness comes from independent seed-sequence children, so
    parallel induction yields the same forest as serial.
    """
    config = config or ForestConfig()
    if config.tree_count < 1:
        raise InvalidInputError("tree_count must be >= 1")
    if config.min_samples_leaf < 1:
        raise InvalidInputError("min_samples_leaf must be >= 1")
    max_features = _resolve_max_features(config.max_features, data.feature_count)
    children = np.random.SeedSequence(seed).spawn(config.tree_count)
    X, y = data.features, data.labels
    if config.n_jobs == 1:
        trees = [
            _fit_one_tree(X, y, data.class_count, s, config, max_features) for s in children
        ]
    else:
        trees = Parallel(n_jobs=config.n_jobs)(
            delayed(_fit_one_tree)(X, y, data.class_count, s, config, max_features)
            for s in children
        )
    return ForestModel(
        trees=trees,
        tree_count=config.tree_count,
        class_count=data.class_count,
        feature_count=data.feature_count,
        seed=seed,
        config=config,
    )


def forest_signature(model: ForestModel, x: np.ndarray) -> MembershipSignature:
    """Leaf ids reached by a single point, one per tree."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise InvalidInputError("x must be a single point")
    leaves = model.apply(x[None, :])[0]
    return MembershipSignature(kind=FOREST, forest_leaves=leaves)


def forest_signatures(model: ForestModel, X: np.ndarray) -> list[MembershipSignature]:
    leaf_matrix = model.apply(X)
    return [MembershipSignature(kind=FOREST, forest_leaves=row) for row in leaf_matrix]
