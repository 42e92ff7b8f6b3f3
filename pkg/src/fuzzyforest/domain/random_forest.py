"""CART trees, bagged forests, out-of-bag error and permutation importance."""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import replace

import numpy as np
import structlog
from joblib import Parallel, delayed

from fuzzyforest.domain.errors import (
    EmptyFeatureSetError,
    InvalidConfigError,
    MissingFeatureValueError,
    NoOutOfBagError,
)
from fuzzyforest.domain.models import (
    FeatureMatrix,
    FloatArray,
    Forest,
    IntArray,
    Tree,
    TreeParams,
    VimTable,
)

logger = structlog.get_logger(__name__)


def derive_seed(seed: int, *keys: int) -> int:
    """Independent child seed for ``(seed, *keys)``, stable across runs and schedules."""
    state = np.random.SeedSequence([seed, *keys]).generate_state(1, dtype=np.uint64)
    return int(state[0] >> np.uint64(1))


def gini_impurity(class_counts: Sequence[float] | FloatArray) -> float:
    """1 - sum_k (c_k / N)^2."""
    counts = np.asarray(class_counts, dtype=np.float64)
    if (counts < 0).any():
        raise InvalidConfigError("class counts must be nonnegative")
    total = counts.sum()
    if total <= 0:
        raise InvalidConfigError("class counts must not all be zero")
    shares = counts / total
    return float(1.0 - np.sum(shares**2))


def _best_split(
    X: FloatArray, y: IntArray, idx: IntArray, candidates: IntArray, min_leaf: int
) -> tuple[int, float] | None:
    """(feature, threshold) minimising weighted child Gini; ties go to the lowest column."""
    n = idx.size
    n_left = np.arange(1, n, dtype=np.float64)
    n_right = n - n_left
    best_score = np.inf
    best: tuple[int, float] | None = None
    labels = y[idx]
    for feature in np.sort(candidates):
        x = X[idx, feature]
        order = np.argsort(x, kind="stable")
        xs = x[order]
        ys = labels[order]
        valid = xs[:-1] < xs[1:]
        if min_leaf > 1:
            valid &= (n_left >= min_leaf) & (n_right >= min_leaf)
        if not valid.any():
            continue
        pos_left = np.cumsum(ys)[:-1].astype(np.float64)
        pos_right = float(ys.sum()) - pos_left
        # binary Gini of a child with c positives out of m is 2·c·(m - c)/m²
        score = 2.0 * (
            pos_left * (n_left - pos_left) / n_left + pos_right * (n_right - pos_right) / n_right
        ) / n
        score[~valid] = np.inf
        i = int(np.argmin(score))
        if score[i] < best_score:
            best_score = float(score[i])
            best = (int(feature), float((xs[i] + xs[i + 1]) / 2.0))
    return best


def fit_tree(
    data: FeatureMatrix,
    rows: IntArray,
    params: TreeParams,
    rng: np.random.Generator,
    features: IntArray | None = None,
) -> Tree:
    """
    Grow one CART classification tree on a (bootstrap) row multiset.

    At every node ``mtry`` candidate features are drawn without replacement
    and the (feature, midpoint threshold) pair with the lowest weighted child
    Gini is taken. Growth stops on pure nodes, at ``max_depth``, below
    ``min_split`` samples, or when no candidate admits a split.
    """
    X = data.values
    y = data.require_labels()
    rows = np.asarray(rows, dtype=np.int64)
    if rows.size == 0:
        raise InvalidConfigError("fit_tree needs at least one row")
    pool = np.arange(data.n_features, dtype=np.int64) if features is None else np.asarray(features)
    mtry = params.resolve_mtry(int(pool.size))

    # Node arrays grow in step; children are appended in pairs
    feature: list[int] = [-1]
    threshold: list[float] = [0.0]
    left: list[int] = [-1]
    right: list[int] = [-1]
    value: list[FloatArray] = [np.zeros(2)]

    stack: list[tuple[int, IntArray, int]] = [(0, rows, 0)]
    while stack:
        node, idx, depth = stack.pop()
        counts = np.bincount(y[idx], minlength=2).astype(np.float64)
        value[node] = counts
        # Leaf conditions
        if (
            counts.min() == 0
            or idx.size < params.min_split
            or (params.max_depth is not None and depth >= params.max_depth)
        ):
            continue
        # Best midpoint split among mtry sampled features
        candidates = rng.choice(pool, size=mtry, replace=False)
        split = _best_split(X, y, idx, candidates, params.min_leaf)
        if split is None:
            continue
        f, t = split
        goes_left = X[idx, f] <= t
        left_id, right_id = len(feature), len(feature) + 1
        for _ in range(2):
            feature.append(-1)
            threshold.append(0.0)
            left.append(-1)
            right.append(-1)
            value.append(np.zeros(2))
        feature[node], threshold[node] = f, t
        left[node], right[node] = left_id, right_id
        stack.append((right_id, idx[~goes_left], depth + 1))
        stack.append((left_id, idx[goes_left], depth + 1))

    # Rows never drawn into the bag are out-of-bag
    oob = np.setdiff1d(np.arange(data.n_rows, dtype=np.int64), rows)
    return Tree(
        feature=np.asarray(feature, dtype=np.int64),
        threshold=np.asarray(threshold, dtype=np.float64),
        left=np.asarray(left, dtype=np.int64),
        right=np.asarray(right, dtype=np.int64),
        value=np.vstack(value),
        in_bag=rows,
        oob=oob,
    )


def apply_tree(tree: Tree, X: FloatArray) -> IntArray:
    """Leaf index reached by every row of ``X``."""
    node = np.zeros(X.shape[0], dtype=np.int64)
    while True:
        split_on = tree.feature[node]
        active = np.flatnonzero(split_on >= 0)
        if active.size == 0:
            return node
        current = node[active]
        goes_left = X[active, split_on[active]] <= tree.threshold[current]
        node[active] = np.where(goes_left, tree.left[current], tree.right[current])


def predict_tree(tree: Tree, X: FloatArray) -> IntArray:
    """Majority class of the reached leaf (ties predict class 0)."""
    leaves = apply_tree(tree, X)
    return np.argmax(tree.value[leaves], axis=1).astype(np.int64)


def bootstrap_rows(n: int, weights: FloatArray | None, rng: np.random.Generator) -> IntArray:
    """n rows drawn with replacement, with probability proportional to weight."""
    if weights is None:
        return rng.integers(0, n, size=n).astype(np.int64)
    probabilities = weights / weights.sum()
    return rng.choice(n, size=n, replace=True, p=probabilities).astype(np.int64)


def fit_forest(
    data: FeatureMatrix,
    features: Sequence[int] | IntArray,
    n_trees: int,
    params: TreeParams,
    seed: int,
    n_jobs: int = 1,
) -> Forest:
    """
    Fit a bagged forest restricted to ``features``.

    Tree ``t`` draws its bootstrap and split candidates from the stream
    ``derive_seed(seed, t)``, so the forest is identical for any ``n_jobs``.

    Raises:
        EmptyFeatureSetError: If ``features`` is empty
    """
    subset = np.unique(np.asarray(features, dtype=np.int64))
    if subset.size == 0:
        raise EmptyFeatureSetError("Cannot fit a forest on an empty feature subset")
    if n_trees < 1:
        raise InvalidConfigError("n_trees must be >= 1")
    data.require_labels()
    resolved = replace(params, mtry=params.resolve_mtry(int(subset.size)))

    def grow(t: int) -> Tree:
        rng = np.random.default_rng(derive_seed(seed, t))
        rows = bootstrap_rows(data.n_rows, data.weights, rng)
        return fit_tree(data, rows, resolved, rng, subset)

    trees: list[Tree] = Parallel(n_jobs=n_jobs, prefer="threads")(
        delayed(grow)(t) for t in range(n_trees)
    )
    names = data.columns
    logger.debug("forest.fit", trees=n_trees, features=int(subset.size), mtry=resolved.mtry)
    return Forest(
        trees=trees,
        features=subset,
        feature_names=[names[f] for f in subset],
        n_columns=data.n_features,
        params=resolved,
        seed=seed,
    )


def predict_proba(forest: Forest, X: FloatArray) -> FloatArray:
    """
    Average of per-tree leaf class frequencies.

    Args:
        forest: Fitted forest
        X: One row or an m×p matrix in the forest's training column layout

    Returns:
        m×2 array of class probabilities (a single row gives shape (2,))

    Raises:
        MissingFeatureValueError: If a row lacks a value for a forest feature
    """
    matrix = np.asarray(X, dtype=np.float64)
    single = matrix.ndim == 1
    if single:
        matrix = matrix[None, :]
    if matrix.shape[1] != forest.n_columns:
        raise MissingFeatureValueError(
            f"Rows have {matrix.shape[1]} columns; the forest expects {forest.n_columns}"
        )
    if np.isnan(matrix[:, forest.features]).any():
        raise MissingFeatureValueError("A row has no value for a forest feature")
    total = np.zeros((matrix.shape[0], 2))
    for tree in forest.trees:
        total += tree.leaf_probabilities()[apply_tree(tree, matrix)]
    probabilities = total / forest.n_trees
    return probabilities[0] if single else probabilities


def predict_matrix(forest: Forest, data: FeatureMatrix) -> FloatArray:
    """predict_proba on a FeatureMatrix whose columns are matched to the forest by name."""
    positions = {name: j for j, name in enumerate(data.columns)}
    layout = np.zeros((data.n_rows, forest.n_columns))
    for feature, name in zip(forest.features, forest.feature_names, strict=True):
        if name not in positions:
            raise MissingFeatureValueError(f"Feature '{name}' is absent from the data")
        layout[:, feature] = data.values[:, positions[name]]
    return predict_proba(forest, layout)


def oob_error(forest: Forest, data: FeatureMatrix) -> float:
    """
    Misclassification rate of out-of-bag majority votes.

    Rows that are in-bag for every tree are skipped and counted in a warning.

    Raises:
        NoOutOfBagError: If no row is out-of-bag for any tree
    """
    y = data.require_labels()
    votes = np.zeros((data.n_rows, 2))
    for tree in forest.trees:
        if tree.oob.size == 0:
            continue
        predicted = predict_tree(tree, data.values[tree.oob])
        votes[tree.oob, predicted] += 1.0
    scored = votes.sum(axis=1) > 0
    if not scored.any():
        raise NoOutOfBagError("No row is out-of-bag for any tree; add trees")
    skipped = int(data.n_rows - scored.sum())
    if skipped:
        logger.warning("forest.oob.skipped", rows=skipped)
    predicted_class = (votes[:, 1] > votes[:, 0]).astype(np.int64)
    return float(np.mean(predicted_class[scored] != y[scored]))


def permutation_vim(
    forest: Forest, data: FeatureMatrix, seed: int, n_jobs: int = 1
) -> VimTable:
    """
    Permutation variable importance from out-of-bag rows.

    For tree t and feature f the contribution is the tree's OOB accuracy minus
    its OOB accuracy after shuffling f over the OOB rows. A feature the tree
    never splits on contributes exactly 0. Importance is the mean over trees
    that have OOB rows; tree t permutes with the stream ``derive_seed(seed, t)``.
    """
    X = data.values
    y = data.require_labels()
    features = forest.features

    def contributions(t: int, tree: Tree) -> FloatArray | None:
        if tree.oob.size == 0:
            return None
        rng = np.random.default_rng(derive_seed(seed, t))
        X_oob = X[tree.oob]
        y_oob = y[tree.oob]
        baseline = float(np.mean(predict_tree(tree, X_oob) == y_oob))
        used = set(tree.used_features.tolist())
        drop = np.zeros(features.size)
        for i, f in enumerate(features):
            if int(f) not in used:
                continue
            original = X_oob[:, f].copy()
            X_oob[:, f] = rng.permutation(original)
            drop[i] = baseline - float(np.mean(predict_tree(tree, X_oob) == y_oob))
            X_oob[:, f] = original
        return drop

    per_tree = Parallel(n_jobs=n_jobs, prefer="threads")(
        delayed(contributions)(t, tree) for t, tree in enumerate(forest.trees)
    )
    scored = [drop for drop in per_tree if drop is not None]
    importance = np.mean(np.vstack(scored), axis=0) if scored else np.zeros(features.size)
    return VimTable(
        features=features.copy(),
        importance=importance,
        feature_names=list(forest.feature_names),
    )
