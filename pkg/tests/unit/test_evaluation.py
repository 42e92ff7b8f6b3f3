"""Unit tests for folds, ROC curves and the ridge logit."""

import numpy as np
import pytest
from fuzzyforest.domain.errors import ConvergenceError, InvalidConfigError, SingleClassError
from fuzzyforest.domain.evaluation import (
    cross_validate,
    fit_logit,
    kfold_split,
    logit_gradient,
    logit_objective,
    predict_logit,
    roc_curve,
    score_forest,
)
from fuzzyforest.domain.models import (
    EvalConfig,
    FeatureMatrix,
    Forest,
    FuzzyConfig,
    LogitModel,
    ModelKind,
    TreeParams,
)
from fuzzyforest.domain.random_forest import fit_forest, predict_proba
from scipy.optimize import minimize
from scipy.special import expit

from tests.factories import make_matrix


def _pair_count_auc(scores: np.ndarray, labels: np.ndarray) -> float:
    positive = scores[labels == 1]
    negative = scores[labels == 0]
    wins = (positive[:, None] > negative[None, :]).sum()
    ties = (positive[:, None] == negative[None, :]).sum()
    return float((wins + 0.5 * ties) / (positive.size * negative.size))


class TestKfoldSplit:
    """Test suite for fold assignment."""

    def test_even_split(self) -> None:
        plan = kfold_split(10, 5, seed=1)
        assert plan.sizes() == [2] * 5

    def test_stratified_one_of_each_class(self) -> None:
        labels = np.array([0] * 5 + [1] * 5)
        plan = kfold_split(10, 5, labels, stratified=True, seed=2)
        assert plan.stratified
        for fold in range(5):
            assert sorted(labels[plan.test_rows(fold)].tolist()) == [0, 1]

    def test_survey_sized_split(self) -> None:
        assert kfold_split(43890, 10, seed=0).sizes() == [4389] * 10

    def test_stratification_bounds(self) -> None:
        rng = np.random.default_rng(3)
        labels = (rng.uniform(size=97) < 0.3).astype(np.int64)
        plan = kfold_split(97, 7, labels, seed=4)
        sizes = plan.sizes()
        assert max(sizes) - min(sizes) <= 1
        for cls in (0, 1):
            per_fold = [int((labels[plan.test_rows(f)] == cls).sum()) for f in range(7)]
            assert max(per_fold) - min(per_fold) <= 1

    def test_every_row_in_one_fold(self) -> None:
        plan = kfold_split(23, 4, seed=5)
        rows = np.concatenate([plan.test_rows(f) for f in range(4)])
        assert sorted(rows.tolist()) == list(range(23))
        assert np.array_equal(np.sort(np.concatenate([plan.train_rows(0), plan.test_rows(0)])), np.arange(23))

    def test_deterministic_per_seed(self) -> None:
        assert np.array_equal(kfold_split(30, 3, seed=9).assignment, kfold_split(30, 3, seed=9).assignment)

    def test_small_class_falls_back(self) -> None:
        labels = np.array([0] * 8 + [1] * 2)
        plan = kfold_split(10, 5, labels, stratified=True, seed=1)
        assert not plan.stratified
        assert plan.warnings

    def test_k_above_n(self) -> None:
        with pytest.raises(InvalidConfigError):
            kfold_split(3, 5)


class TestRocCurve:
    """Test suite for roc_curve."""

    def test_perfect_separation(self) -> None:
        roc = roc_curve(np.array([0.9, 0.8, 0.3, 0.2]), np.array([1, 1, 0, 0]))
        assert roc.auc == 1.0

    def test_all_scores_tied(self) -> None:
        roc = roc_curve(np.full(6, 0.4), np.array([1, 0, 1, 0, 0, 1]))
        assert roc.auc == 0.5
        assert roc.fpr.tolist() == [0.0, 1.0]

    def test_three_of_four_pairs(self) -> None:
        roc = roc_curve(np.array([0.9, 0.6, 0.4, 0.2]), np.array([1, 0, 1, 0]))
        assert roc.auc == pytest.approx(0.75)

    def test_curve_shape(self) -> None:
        rng = np.random.default_rng(6)
        roc = roc_curve(rng.uniform(size=50), rng.integers(0, 2, size=50))
        assert (roc.fpr[0], roc.tpr[0]) == (0.0, 0.0)
        assert (roc.fpr[-1], roc.tpr[-1]) == (1.0, 1.0)
        assert np.all(np.diff(roc.fpr) >= 0)
        assert np.all(np.diff(roc.tpr) >= 0)
        assert roc.thresholds[0] == np.inf

    def test_matches_pair_counting(self) -> None:
        rng = np.random.default_rng(7)
        for _ in range(100):
            n = int(rng.integers(2, 1000))
            labels = rng.integers(0, 2, size=n)
            labels[:2] = [0, 1]
            scores = np.round(rng.uniform(size=n), 2)
            assert abs(roc_curve(scores, labels).auc - _pair_count_auc(scores, labels)) <= 1e-12

    def test_invariant_under_increasing_transform(self) -> None:
        rng = np.random.default_rng(8)
        scores = rng.integers(0, 40, size=200).astype(np.float64)
        labels = rng.integers(0, 2, size=200)
        assert roc_curve(scores, labels).auc == roc_curve(scores**3 + 5.0, labels).auc

    def test_single_class(self) -> None:
        with pytest.raises(SingleClassError):
            roc_curve(np.array([0.1, 0.2]), np.array([1, 1]))


class TestLogit:
    """Test suite for the ridge logistic regression."""

    def test_gradient_matches_finite_differences(self) -> None:
        rng = np.random.default_rng(9)
        for _ in range(20):
            n, p = int(rng.integers(5, 30)), int(rng.integers(1, 5))
            X = rng.normal(size=(n, p))
            y = rng.integers(0, 2, size=n)
            theta = rng.normal(size=p + 1)
            lam = float(rng.uniform(0, 0.5))
            h = 1e-6
            numeric = np.array(
                [
                    (
                        logit_objective(theta + h * e, X, y, lam)
                        - logit_objective(theta - h * e, X, y, lam)
                    )
                    / (2 * h)
                    for e in np.eye(p + 1)
                ]
            )
            analytic = logit_gradient(theta, X, y, lam)
            assert np.linalg.norm(analytic - numeric) <= 1e-6 * max(1.0, np.linalg.norm(analytic))

    def test_feature_equal_to_label(self) -> None:
        labels = np.array([0, 1] * 20)
        data = make_matrix(labels[:, None].astype(float), labels)

        model = fit_logit(data, lam=1e-3)

        assert model.converged
        assert model.grad_norm <= 1e-8
        probabilities = predict_logit(model, data.values)
        assert np.all(probabilities[labels == 1] >= 0.9)

    def test_matches_generic_optimizer(self) -> None:
        rng = np.random.default_rng(10)
        X = rng.normal(size=(80, 3))
        y = (X @ np.array([1.0, -2.0, 0.5]) + rng.normal(size=80) > 0).astype(np.int64)

        model = fit_logit(make_matrix(X, y), lam=0.01)
        reference = minimize(
            logit_objective, np.zeros(4), args=(X, y, 0.01), jac=logit_gradient, method="BFGS",
            options={"gtol": 1e-10},
        )  # fmt: skip

        assert model.intercept == pytest.approx(reference.x[0], abs=1e-5)
        assert np.allclose(model.coef, reference.x[1:], atol=1e-5)

    def test_objective_decreases(self, separable_data: FeatureMatrix) -> None:
        model = fit_logit(separable_data, lam=0.05)
        path = np.array(model.objective_path)
        assert np.all(np.diff(path) <= 0)

    def test_single_class_is_intercept_only(self) -> None:
        data = make_matrix(np.random.default_rng(11).normal(size=(9, 2)), np.ones(9, dtype=np.int64))
        model = fit_logit(data, lam=0.0)
        assert np.all(model.coef == 0.0)
        assert predict_logit(model, data.values)[0] == pytest.approx(9.5 / 10.0)
        assert model.warnings

    def test_single_class_intercept_follows_lambda(self) -> None:
        X = np.random.default_rng(11).normal(size=(9, 2))
        weak = fit_logit(make_matrix(X, np.ones(9, dtype=np.int64)), lam=1e-3)
        strong = fit_logit(make_matrix(X, np.ones(9, dtype=np.int64)), lam=0.1)
        negative = fit_logit(make_matrix(X, np.zeros(9, dtype=np.int64)), lam=1e-3)

        for model in (weak, strong):
            assert np.all(model.coef == 0.0)
            # zero derivative of log(1 + e^-b) + lam·b²
            assert 2.0 * model.lam * model.intercept == pytest.approx(expit(-model.intercept))
        p_weak = predict_logit(weak, X)[0]
        assert p_weak > 9.5 / 10.0
        assert p_weak > predict_logit(strong, X)[0]
        assert negative.intercept == pytest.approx(-weak.intercept)

    def test_unpenalised_separable_data_warns(self, separable_data: FeatureMatrix) -> None:
        model = fit_logit(separable_data, lam=0.0, max_iter=200)
        assert not model.converged
        assert "separable" in model.warnings[0]

    def test_iteration_budget_exhausted(self, separable_data: FeatureMatrix) -> None:
        with pytest.raises(ConvergenceError) as exc:
            fit_logit(separable_data, lam=0.05, max_iter=1)
        assert exc.value.iterations == 1


class TestCrossValidate:
    """Test suite for cross-validation."""

    def test_two_fold_smoke(self) -> None:
        rng = np.random.default_rng(12)
        data = make_matrix(rng.normal(size=(10, 3)), np.array([0, 1] * 5))
        folds = kfold_split(10, 2, data.labels, seed=1)

        for model in (ModelKind.LOGIT, ModelKind.FULL_RF):
            result = cross_validate(
                model, data, folds, FuzzyConfig(selection_trees=5), eval_config=EvalConfig(k=2)
            )
            assert len(result.fold_aucs) == 2
            assert all(np.isfinite(result.fold_aucs))
            assert result.best_roc.auc == max(result.fold_aucs)

    def test_separable_data_scores_high(self, separable_data: FeatureMatrix) -> None:
        folds = kfold_split(separable_data.n_rows, 4, separable_data.labels, seed=2)
        result = cross_validate(
            ModelKind.FULL_RF, separable_data, folds, FuzzyConfig(selection_trees=25)
        )
        assert result.mean_auc >= 0.95
        assert result.pooled_roc.auc >= 0.95

    def test_parallel_folds_match_serial(self, separable_data: FeatureMatrix) -> None:
        folds = kfold_split(separable_data.n_rows, 3, separable_data.labels, seed=3)
        config = FuzzyConfig(selection_trees=5)
        serial = cross_validate(ModelKind.FULL_RF, separable_data, folds, config, n_jobs=1)
        threaded = cross_validate(ModelKind.FULL_RF, separable_data, folds, config, n_jobs=3)
        assert serial.fold_aucs == threaded.fold_aucs

    def test_best_model_rescores_best_fold(self, separable_data: FeatureMatrix) -> None:
        folds = kfold_split(separable_data.n_rows, 3, separable_data.labels, seed=4)
        for model in (ModelKind.LOGIT, ModelKind.FULL_RF):
            result = cross_validate(model, separable_data, folds, FuzzyConfig(selection_trees=8))
            rows = folds.test_rows(result.best_fold)
            X, y = separable_data.values[rows], separable_data.labels[rows]
            if model is ModelKind.LOGIT:
                assert isinstance(result.best_model, LogitModel)
                scores = predict_logit(result.best_model, X)
            else:
                assert isinstance(result.best_model, Forest)
                scores = predict_proba(result.best_model, X)[:, 1]
            assert roc_curve(scores, y).auc == result.best_roc.auc

    def test_mismatched_plan(self, separable_data: FeatureMatrix) -> None:
        with pytest.raises(InvalidConfigError):
            cross_validate(ModelKind.LOGIT, separable_data, kfold_split(10, 2, seed=0))


def test_score_forest_on_training_data(separable_data: FeatureMatrix) -> None:
    forest = fit_forest(separable_data, [0, 1, 2], 10, TreeParams(), seed=1)
    assert score_forest(forest, separable_data).auc > 0.95
