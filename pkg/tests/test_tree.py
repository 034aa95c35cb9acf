from fractions import Fraction

import numpy as np
import pytest

from seqpol.models.base import load_model, model_from_dict
from seqpol.models.tree import fit_tree
from seqpol.staterep import StateMatrix

from conftest import random_matrix


def matrix(X, y, K=2, names=None):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    n = X.shape[0]
    return StateMatrix(
        X=X,
        feature_names=names or [f"f{i}" for i in range(X.shape[1])],
        y=np.asarray(y, dtype=int),
        action_labels=[f"a{k}" for k in range(K)],
        patient_ids=[f"p{i}" for i in range(n)],
        stages=np.ones(n, dtype=int),
        prev_actions=np.zeros(n, dtype=int),
        severity=np.full(n, np.nan),
        spec_name="test",
    )


class TestFitTree:
    def test_perfect_split_depth_one(self):
        m = matrix([0, 0, 1, 1], [0, 0, 1, 1])
        model = fit_tree(m, max_depth=1)
        assert model.n_leaves == 2
        assert model.depth == 1
        preds = model.predict(m.X, m.feature_names)
        assert np.array_equal(preds, m.y)

    def test_min_samples_split_binds(self):
        rng = np.random.default_rng(0)
        m = matrix(rng.standard_normal(100), rng.integers(0, 2, 100))
        model = fit_tree(m, min_samples_split=128)
        assert model.n_leaves == 1
        assert model.depth == 0

    def test_tie_breaks_to_lowest_feature_index(self):
        # duplicate columns: identical gains, the first feature must win
        X = np.array([[0.0, 0.0], [0.0, 0.0], [1.0, 1.0], [1.0, 1.0]])
        model = fit_tree(matrix(X, [0, 0, 1, 1]), max_depth=1)
        assert model.root.feature == 0

    def test_leaf_probabilities_are_exact_frequencies(self):
        X = np.array([0.0, 0.0, 0.0, 1.0, 1.0])
        y = np.array([0, 0, 1, 1, 1])
        model = fit_tree(matrix(X, y), max_depth=1)
        left = model.predict_proba(np.array([0.0]), model.feature_names)
        assert left[0] == float(Fraction(2, 3)) and left[1] == float(Fraction(1, 3))
        right = model.predict_proba(np.array([1.0]), model.feature_names)
        assert right[0] == 0.0 and right[1] == 1.0

    def test_single_class_gives_depth_zero_certainty(self):
        m = matrix([1.0, 2.0, 3.0], [1, 1, 1])
        model = fit_tree(m)
        assert model.n_leaves == 1
        probs = model.predict_proba(np.array([9.0]), m.feature_names)
        assert probs[1] == 1.0

    def test_threshold_is_midpoint(self):
        m = matrix([1.0, 3.0], [0, 1])
        model = fit_tree(m, max_depth=1)
        assert model.root.threshold == 2.0

    def test_entropy_criterion_also_splits(self):
        m = matrix([0, 0, 1, 1], [0, 0, 1, 1])
        model = fit_tree(m, criterion="entropy", max_depth=3)
        assert model.n_leaves == 2

    def test_depth_zero_tree_predicts_class_frequencies(self):
        m = matrix([1.0, 2.0, 3.0, 4.0], [0, 0, 0, 1])
        model = fit_tree(m, max_depth=0)
        probs = model.predict_proba(np.array([2.5]), m.feature_names)
        assert probs == pytest.approx([0.75, 0.25])

    def test_deterministic_across_fits(self):
        m = random_matrix(seed=5, n=200, d=5, K=3)
        a = fit_tree(m, max_depth=6)
        b = fit_tree(m, max_depth=6)
        assert a.to_dict() == b.to_dict()

    def test_dot_export_mentions_features(self):
        m = matrix([0, 0, 1, 1], [0, 0, 1, 1], names=["marker"])
        dot = fit_tree(m, max_depth=1).to_dot()
        assert dot.startswith("digraph")
        assert "marker" in dot

    def test_serialization_round_trip(self, tmp_path):
        m = random_matrix(seed=6, n=120, d=4, K=3)
        model = fit_tree(m, max_depth=4)
        path = tmp_path / "tree.json"
        model.save(str(path))
        again = load_model(str(path))
        probs_a = model.predict_proba(m.X[:10], m.feature_names)
        probs_b = again.predict_proba(m.X[:10], m.feature_names)
        assert np.array_equal(probs_a, probs_b)
        assert again.n_leaves == model.n_leaves

    def test_onehot_inputs_bound_leaf_count(self):
        # with K mutually exclusive indicator columns there are only K
        # distinct rows, so no tree can carve more than K nonempty leaves
        rng = np.random.default_rng(7)
        K = 5
        idx = rng.integers(0, K, 400)
        X = np.eye(K)[idx]
        y = rng.integers(0, K, 400)
        model = fit_tree(matrix(X, y, K=K), max_depth=15)
        assert model.n_leaves <= K + 1
