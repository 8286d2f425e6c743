from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest
from sklearn.ensemble import RandomForestClassifier

from kdx.data import Dataset
from kdx.errors import InvalidInputError
from kdx.forest import ForestConfig, forest_signature, train_forest
from kdx.simulations import gen_xor


def _separable_four_points():
    X = np.array([[0.0, 0.0], [0.1, 0.2], [1.0, 1.0], [1.2, 0.9]])
    y = np.array([0, 0, 1, 1])
    return Dataset(X, y)


def test_default_config_matches_reference_hyperparameters():
    cfg = ForestConfig()
    assert cfg.tree_count == 500
    assert cfg.max_depth is None
    assert cfg.min_samples_leaf == 1


def test_single_tree_fits_separable_data():
    ds = _separable_four_points()
    model = train_forest(ds, ForestConfig(tree_count=1, bootstrap=False), seed=0)
    assert (model.predict(ds.features) == ds.labels).all()


def test_xor_training_accuracy_matches_reference_cart():
    ds = gen_xor(1000, seed=3)
    model = train_forest(ds, ForestConfig(tree_count=100), seed=0)
    acc = (model.predict(ds.features) == ds.labels).mean()

    oracle = RandomForestClassifier(n_estimators=100, min_samples_leaf=1, random_state=0)
    oracle.fit(ds.features, ds.labels)
    oracle_acc = oracle.score(ds.features, ds.labels)

    assert oracle_acc >= 0.99
    assert acc >= 0.99


def test_single_class_dataset_yields_single_leaf_trees():
    ds = Dataset(np.random.default_rng(0).normal(size=(10, 2)), np.zeros(10, dtype=int), 1)
    model = train_forest(ds, ForestConfig(tree_count=3), seed=0)
    for tree in model.trees:
        assert tree.node_count == 1


def test_zero_training_impurity_without_depth_cap():
    ds = gen_xor(300, seed=5)
    model = train_forest(ds, ForestConfig(tree_count=10, bootstrap=False), seed=1)
    assert (model.predict(ds.features) == ds.labels).all()


def test_forest_seed_reproducibility():
    ds = gen_xor(200, seed=2)
    a = train_forest(ds, ForestConfig(tree_count=5), seed=42)
    b = train_forest(ds, ForestConfig(tree_count=5), seed=42)
    for ta, tb in zip(a.trees, b.trees):
        assert np.array_equal(ta.threshold, tb.threshold)
        assert np.array_equal(ta.feature, tb.feature)
        assert np.array_equal(ta.leaf_counts, tb.leaf_counts)
    c = train_forest(ds, ForestConfig(tree_count=5), seed=43)
    assert any(
        not np.array_equal(ta.threshold, tc.threshold) for ta, tc in zip(a.trees, c.trees)
    )


def test_parallel_training_matches_serial():
    ds = gen_xor(150, seed=9)
    serial = train_forest(ds, ForestConfig(tree_count=8, n_jobs=1), seed=7)
    parallel = train_forest(ds, ForestConfig(tree_count=8, n_jobs=2), seed=7)
    for ta, tb in zip(serial.trees, parallel.trees):
        assert np.array_equal(ta.threshold, tb.threshold)
        assert np.array_equal(ta.children_left, tb.children_left)


def test_signature_determinism():
    ds = gen_xor(100, seed=1)
    model = train_forest(ds, ForestConfig(tree_count=7), seed=0)
    x = ds.features[3]
    a = forest_signature(model, x)
    b = forest_signature(model, x)
    assert np.array_equal(a.forest_leaves, b.forest_leaves)
    assert a.key() == b.key()


def test_signature_thread_safety():
    ds = gen_xor(60, seed=4)
    model = train_forest(ds, ForestConfig(tree_count=5), seed=0)
    points = [ds.features[i] for i in range(20)]
    with ThreadPoolExecutor(max_workers=4) as pool:
        twice = [list(pool.map(lambda p: forest_signature(model, p).key(), points)) for _ in range(2)]
    assert twice[0] == twice[1]


def test_stump_signature_routing():
    # two hand-checkable stumps splitting feature 0 at 0.0
    ds = Dataset(np.array([[-1.0, 0.0], [1.0, 0.0]]), np.array([0, 1]))
    model = train_forest(
        ds, ForestConfig(tree_count=2, bootstrap=False, max_features="all"), seed=0
    )
    sig = forest_signature(model, np.array([1.0, 1.0]))
    for tree, leaf in zip(model.trees, sig.forest_leaves):
        assert tree.feature[0] == 0
        assert leaf == tree.children_right[0]


def test_training_point_leaves_contain_its_label():
    ds = gen_xor(200, seed=8)
    model = train_forest(ds, ForestConfig(tree_count=10, bootstrap=False), seed=3)
    rng = np.random.default_rng(0)
    for i in rng.choice(ds.sample_count, size=20, replace=False):
        sig = forest_signature(model, ds.features[i])
        for tree, leaf in zip(model.trees, sig.forest_leaves):
            assert tree.leaf_counts[leaf, ds.labels[i]] > 0


def test_leaf_purity_when_trained_without_bootstrap():
    ds = gen_xor(300, seed=6)
    model = train_forest(ds, ForestConfig(tree_count=5, bootstrap=False), seed=0)
    for tree in model.trees:
        reached = np.unique(tree.apply(ds.features))
        assert ((tree.leaf_counts[reached] > 0).sum(axis=1) == 1).all()


def test_signature_dimension_mismatch():
    ds = gen_xor(50, seed=0)
    model = train_forest(ds, ForestConfig(tree_count=2), seed=0)
    with pytest.raises(InvalidInputError):
        forest_signature(model, np.array([1.0, 2.0, 3.0]))


def test_signature_rejects_non_finite():
    ds = gen_xor(50, seed=0)
    model = train_forest(ds, ForestConfig(tree_count=2), seed=0)
    with pytest.raises(InvalidInputError):
        forest_signature(model, np.array([np.inf, 0.0]))


def test_tree_count_must_be_positive():
    ds = gen_xor(50, seed=0)
    with pytest.raises(InvalidInputError):
        train_forest(ds, ForestConfig(tree_count=0), seed=0)
