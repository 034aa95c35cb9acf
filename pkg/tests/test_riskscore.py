import numpy as np
import pytest

from seqpol.errors import FitError, UnsupportedModelError
from seqpol.models.riskscore import (
    best_single_feature_model,
    fit_riskscore,
    optimal_intercept,
    weighted_logloss,
)
from seqpol.staterep import StateMatrix

from conftest import random_matrix


def binary_matrix(X, y):
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    return StateMatrix(
        X=X,
        feature_names=[f"f{i}" for i in range(X.shape[1])],
        y=np.asarray(y, dtype=int),
        action_labels=["neg", "pos"],
        patient_ids=[f"p{i}" for i in range(n)],
        stages=np.ones(n, dtype=int),
        prev_actions=np.zeros(n, dtype=int),
        severity=np.full(n, np.nan),
        spec_name="test",
    )


def synthetic_binary(seed, n=300, d=6, informative=(0, 2)):
    rng = np.random.default_rng(seed)
    X = (rng.uniform(size=(n, d)) < 0.4).astype(float)
    logits = -0.5 + 2.0 * X[:, informative[0]] - 1.5 * X[:, informative[1]]
    y = (rng.uniform(size=n) < 1 / (1 + np.exp(-logits))).astype(int)
    return binary_matrix(X, y)


class TestRiskScoreContract:
    def test_score_zero_gives_half(self):
        # weights {+2, -1}, intercept -1, input (1, 1): sigmoid(0) = 0.5
        from seqpol.models.riskscore import RiskScorePolicy

        model = RiskScorePolicy(
            ["f0", "f1"], ["neg", "pos"], np.array([2, -1]), -1.0
        )
        probs = model.predict_proba(np.array([1.0, 1.0]), ["f0", "f1"])
        assert probs[1] == pytest.approx(0.5)

    def test_integer_bounds_and_sparsity(self):
        m = synthetic_binary(seed=0)
        model = fit_riskscore(m, max_coef=4, max_size=3, pos_weight=2)
        assert model.weights.dtype.kind == "i"
        assert np.abs(model.weights).max() <= 4
        assert np.count_nonzero(model.weights) <= 3

    def test_multiclass_rejected(self):
        m = random_matrix(seed=1, n=60, d=3, K=3)
        with pytest.raises(UnsupportedModelError):
            fit_riskscore(m)

    def test_single_class_rejected(self):
        m = binary_matrix(np.ones((5, 2)), [1, 1, 1, 1, 1])
        with pytest.raises(FitError):
            fit_riskscore(m)

    def test_max_size_one_picks_single_best_feature(self):
        # derived oracle: exhaustive search over all 1-feature integer models
        rng = np.random.default_rng(2)
        n, d = 400, 5
        X = (rng.uniform(size=(n, d)) < 0.5).astype(float)
        logits = -1.0 + 2.5 * X[:, 3]
        y = (rng.uniform(size=n) < 1 / (1 + np.exp(-logits))).astype(int)
        m = binary_matrix(X, y)
        model = fit_riskscore(m, max_coef=5, max_size=1, pos_weight=1)

        sw = np.ones(n)
        oracle_w, oracle_loss, _ = best_single_feature_model(X, y.astype(float), sw, 5)
        assert np.flatnonzero(oracle_w).tolist() == [3]
        assert np.flatnonzero(model.weights).tolist() == [3]
        scores = model.intercept + X @ model.weights.astype(float)
        assert weighted_logloss(scores, y.astype(float), sw) <= oracle_loss + 1e-9

    def test_pos_weight_shifts_threshold_toward_positives(self):
        rng = np.random.default_rng(3)
        n, d = 500, 4
        X = (rng.uniform(size=(n, d)) < 0.5).astype(float)
        logits = -2.0 + 1.5 * X[:, 0] + 0.5 * X[:, 1]
        y = (rng.uniform(size=n) < 1 / (1 + np.exp(-logits))).astype(int)
        m = binary_matrix(X, y)

        def recall(model):
            preds = model.predict_proba(m).argmax(axis=1)
            return ((preds == 1) & (m.y == 1)).sum() / max((m.y == 1).sum(), 1)

        light = fit_riskscore(m, max_coef=5, max_size=3, pos_weight=1)
        heavy = fit_riskscore(m, max_coef=5, max_size=3, pos_weight=5)
        assert recall(heavy) >= recall(light)

    def test_serialization_round_trip(self, tmp_path):
        m = synthetic_binary(seed=4)
        model = fit_riskscore(m, max_coef=3, max_size=2)
        path = tmp_path / "rs.json"
        model.save(str(path))
        from seqpol.models.base import load_model

        again = load_model(str(path))
        assert np.array_equal(again.weights, model.weights)
        assert again.intercept == model.intercept

    def test_score_table_lists_nonzero_terms(self):
        m = synthetic_binary(seed=5)
        model = fit_riskscore(m, max_coef=4, max_size=2)
        table = model.score_table()
        assert len(table) == np.count_nonzero(model.weights)
        for name, points in table:
            assert name in model.feature_names
            assert points != 0


class TestIntercept:
    def test_optimal_intercept_matches_scalar_minimization(self):
        rng = np.random.default_rng(6)
        scores = rng.standard_normal(50)
        y = rng.integers(0, 2, 50).astype(float)
        sw = np.where(y == 1, 3.0, 1.0)
        b = optimal_intercept(scores, y, sw)
        grid = np.linspace(b - 0.5, b + 0.5, 201)
        losses = [weighted_logloss(g + scores, y, sw) for g in grid]
        assert weighted_logloss(b + scores, y, sw) <= min(losses) + 1e-9

    def test_balanced_zero_scores_give_log_odds(self):
        y = np.array([0.0, 0.0, 1.0, 1.0, 1.0])
        b = optimal_intercept(np.zeros(5), y, np.ones(5))
        assert b == pytest.approx(np.log(3 / 2), abs=1e-8)
