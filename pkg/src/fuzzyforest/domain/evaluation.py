"""Cross-validation, ROC/AUC and the ridge logistic baseline."""

from __future__ import annotations

from dataclasses import replace

import numpy as np
import structlog
from joblib import Parallel, delayed
from scipy.optimize import brentq
from scipy.special import expit

from fuzzyforest.domain.errors import ConvergenceError, InvalidConfigError, SingleClassError
from fuzzyforest.domain.fuzzy_forests import run_pipeline
from fuzzyforest.domain.models import (
    CvResult,
    EvalConfig,
    FeatureMatrix,
    FloatArray,
    FoldPlan,
    Forest,
    FuzzyConfig,
    IntArray,
    LogitModel,
    ModelKind,
    RocCurve,
    WgcnaConfig,
)
from fuzzyforest.domain.random_forest import derive_seed, fit_forest, predict_matrix, predict_proba

logger = structlog.get_logger(__name__)

ARMIJO_C = 1e-4
MIN_STEP = 1e-10
SEPARABLE_LOSS = 1e-6


def kfold_split(
    n: int,
    k: int,
    labels: IntArray | None = None,
    stratified: bool = True,
    seed: int = 0,
) -> FoldPlan:
    """
    Shuffled assignment of ``n`` rows to ``k`` folds.

    Stratified plans deal each class's shuffled rows round-robin, continuing
    the fold counter across classes so overall fold sizes still differ by at
    most one. A class with fewer than ``k`` members falls back to a plain
    shuffle with a warning.
    """
    if k < 2:
        raise InvalidConfigError("k must be >= 2")
    if k > n:
        raise InvalidConfigError(f"k={k} exceeds the number of rows ({n})")
    rng = np.random.default_rng(seed)
    assignment = np.empty(n, dtype=np.int64)
    warnings: list[str] = []

    if stratified and labels is not None:
        y = np.asarray(labels, dtype=np.int64)
        if y.shape != (n,):
            raise InvalidConfigError("labels must have one entry per row")
        classes, counts = np.unique(y, return_counts=True)
        if counts.min() < k:
            warnings.append(
                f"A class has only {int(counts.min())} rows for k={k}; using unstratified folds"
            )
            logger.warning("folds.unstratified", k=k, smallest_class=int(counts.min()))
            stratified = False
        else:
            offset = 0
            for cls in classes:
                rows = rng.permutation(np.flatnonzero(y == cls))
                assignment[rows] = (offset + np.arange(rows.size)) % k
                offset = (offset + rows.size) % k
            return FoldPlan(k=k, assignment=assignment, stratified=True, seed=seed)

    order = rng.permutation(n)
    assignment[order] = np.arange(n) % k
    return FoldPlan(
        k=k,
        assignment=assignment,
        stratified=False,
        seed=seed,
        warnings=warnings,
    )


def roc_curve(scores: FloatArray, labels: IntArray) -> RocCurve:
    """
    ROC points over the distinct scores in descending order, plus trapezoid AUC.

    Tied scores move the curve diagonally, which is the midrank (half credit)
    convention of the Mann-Whitney statistic.

    Raises:
        SingleClassError: If ``labels`` contain only one class
    """
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    if s.shape != y.shape:
        raise InvalidConfigError("scores and labels must have the same length")
    positives = int(y.sum())
    negatives = int(y.size - positives)
    if positives == 0 or negatives == 0:
        raise SingleClassError("ROC needs both classes among the scored rows")

    order = np.argsort(-s, kind="stable")
    s_sorted = s[order]
    y_sorted = y[order]
    ends = np.append(np.flatnonzero(np.diff(s_sorted) != 0), s_sorted.size - 1)
    tps = np.cumsum(y_sorted)[ends].astype(np.float64)
    fps = (ends + 1) - tps
    tpr = np.concatenate([[0.0], tps / positives])
    fpr = np.concatenate([[0.0], fps / negatives])
    thresholds = np.concatenate([[np.inf], s_sorted[ends]])
    auc = float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) / 2.0))
    return RocCurve(fpr=fpr, tpr=tpr, thresholds=thresholds, auc=auc)


def _design(X: FloatArray) -> FloatArray:
    return np.hstack([np.ones((X.shape[0], 1)), X])


def logit_objective(theta: FloatArray, X: FloatArray, y: IntArray, lam: float) -> float:
    """Mean negative log-likelihood + lam·||coef||²; ``theta[0]`` is the intercept."""
    z = _design(X) @ theta
    nll = np.mean(np.logaddexp(0.0, z) - y * z)
    return float(nll + lam * np.sum(theta[1:] ** 2))


def logit_gradient(theta: FloatArray, X: FloatArray, y: IntArray, lam: float) -> FloatArray:
    design = _design(X)
    p = 1.0 / (1.0 + np.exp(-(design @ theta)))
    grad = design.T @ (p - y) / X.shape[0]
    grad[1:] += 2.0 * lam * theta[1:]
    return grad


def _hessian(theta: FloatArray, X: FloatArray, lam: float) -> FloatArray:
    design = _design(X)
    p = 1.0 / (1.0 + np.exp(-(design @ theta)))
    hess = (design.T * (p * (1.0 - p))) @ design / X.shape[0]
    penalty = np.full(theta.size, 2.0 * lam)
    penalty[0] = 0.0
    return hess + np.diag(penalty)


def _single_class_intercept(label: int, n: int, lam: float) -> float:
    if lam == 0:
        prevalence = (n + 0.5) / (n + 1.0)
        magnitude = float(np.log(prevalence / (1.0 - prevalence)))
    else:
        # stationary point of log(1 + e^-b) + lam·b², bracketed in [0, 1/(2 lam) + 1]
        magnitude = float(
            brentq(lambda b: 2.0 * lam * b - expit(-b), 0.0, 1.0 / (2.0 * lam) + 1.0)
        )
    return magnitude if label == 1 else -magnitude


def fit_logit(
    data: FeatureMatrix,
    lam: float = 1e-3,
    tolerance: float = 1e-8,
    max_iter: int = 100,
) -> LogitModel:
    """
    Ridge logistic regression by damped Newton with Armijo backtracking.

    Converged means gradient norm <= ``tolerance``. With ``lam == 0`` on
    separable data the objective plateaus while the coefficients grow; the
    fit stops there with a divergence warning instead of raising.

    Single-class labels have no finite unpenalised optimum, so the intercept-only
    model penalises the intercept as well: it minimises
    ``log(1 + exp(-b)) + lam·b²`` for the observed class, which tends to
    probability 1 as ``lam`` shrinks. With ``lam == 0`` it falls back to the
    add-half prevalence.

    Raises:
        ConvergenceError: If ``max_iter`` iterations end above ``tolerance``
    """
    if lam < 0:
        raise InvalidConfigError("ridge penalty must be >= 0")
    X = data.values
    y = data.require_labels()
    n, p = X.shape

    if y.min() == y.max():
        message = "Labels hold a single class; fitted an intercept-only model"
        logger.warning("logit.single_class", rows=n)
        return LogitModel(
            coef=np.zeros(p),
            intercept=_single_class_intercept(int(y[0]), n, lam),
            lam=lam,
            iterations=0,
            grad_norm=0.0,
            converged=True,
            warnings=[message],
        )

    theta = np.zeros(p + 1)
    objective = logit_objective(theta, X, y, lam)
    path = [objective]
    warnings: list[str] = []
    grad_norm = float(np.linalg.norm(logit_gradient(theta, X, y, lam)))
    iterations = 0
    converged = grad_norm <= tolerance

    while not converged and iterations < max_iter:
        iterations += 1
        # Newton direction, falling back to the gradient when it is not a descent step
        grad = logit_gradient(theta, X, y, lam)
        hess = _hessian(theta, X, lam)
        try:
            step = np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(hess, grad, rcond=None)[0]
        slope = float(grad @ step)
        if slope <= 0:
            step, slope = grad, float(grad @ grad)

        # Armijo backtracking
        t = 1.0
        candidate = logit_objective(theta - step, X, y, lam)
        while candidate > objective - ARMIJO_C * t * slope and t > MIN_STEP:
            t /= 2.0
            candidate = logit_objective(theta - t * step, X, y, lam)

        plateau = candidate >= objective - 1e-15 * max(1.0, abs(objective))
        if candidate <= objective:
            theta = theta - t * step
            objective = candidate
            path.append(objective)
        grad_norm = float(np.linalg.norm(logit_gradient(theta, X, y, lam)))
        converged = grad_norm <= tolerance
        # unpenalised separable data: the loss heads to 0 as the coefficients blow up
        separable = lam == 0 and objective < SEPARABLE_LOSS
        if (plateau and not converged) or separable:
            if lam == 0:
                warnings.append(
                    "Objective plateaued without a stationary point; the data look separable "
                    "and the unpenalised coefficients diverge (use a ridge penalty)"
                )
                logger.warning("logit.divergence", iterations=iterations, grad_norm=grad_norm)
                break
            raise ConvergenceError(iterations, grad_norm, tolerance)

    if not converged and not warnings:
        raise ConvergenceError(iterations, grad_norm, tolerance)
    logger.debug("logit.fit", iterations=iterations, grad_norm=grad_norm, lam=lam)
    return LogitModel(
        coef=theta[1:].copy(),
        intercept=float(theta[0]),
        lam=lam,
        iterations=iterations,
        grad_norm=grad_norm,
        converged=converged,
        objective_path=path,
        warnings=warnings,
    )


def predict_logit(model: LogitModel, X: FloatArray) -> FloatArray:
    """Class-1 probability per row."""
    z = np.asarray(X, dtype=np.float64) @ model.coef + model.intercept
    return 1.0 / (1.0 + np.exp(-z))


def score_forest(forest: Forest, data: FeatureMatrix) -> RocCurve:
    """ROC of a previously fitted forest on a labeled matrix, columns matched by name."""
    return roc_curve(predict_matrix(forest, data)[:, 1], data.require_labels())


def _score_fold(
    model: ModelKind,
    data: FeatureMatrix,
    folds: FoldPlan,
    fold: int,
    fuzzy_config: FuzzyConfig,
    wgcna_config: WgcnaConfig,
    eval_config: EvalConfig,
) -> tuple[FloatArray, list[int], Forest | LogitModel]:
    train = data.subset_rows(folds.train_rows(fold))
    test = data.subset_rows(folds.test_rows(fold))
    fold_seed = derive_seed(eval_config.rng_seed, fold)
    log = logger.bind(model=model.value, fold=fold)

    if model is ModelKind.FUZZY_RF:
        result = run_pipeline(train, wgcna_config, replace(fuzzy_config, rng_seed=fold_seed))
        features = [int(f) for f in result.selected]
        scores = predict_proba(result.forest, test.values)[:, 1]
        fitted: Forest | LogitModel = result.forest
    elif model is ModelKind.FULL_RF:
        features = list(range(data.n_features))
        forest = fit_forest(
            train, features, fuzzy_config.selection_trees, fuzzy_config.tree_params, fold_seed
        )
        scores = predict_proba(forest, test.values)[:, 1]
        fitted = forest
    else:
        features = list(range(data.n_features))
        logit = fit_logit(train, eval_config.ridge_lambda, eval_config.tolerance, eval_config.max_iter)
        scores = predict_logit(logit, test.values)
        fitted = logit
    log.debug("cv.fold.done", test_rows=test.n_rows)
    return scores, features, fitted


def cross_validate(
    model: ModelKind,
    data: FeatureMatrix,
    folds: FoldPlan,
    fuzzy_config: FuzzyConfig | None = None,
    wgcna_config: WgcnaConfig | None = None,
    eval_config: EvalConfig | None = None,
    n_jobs: int = 1,
) -> CvResult:
    """
    Train on k-1 folds and score the held-out fold, for every fold.

    Fuzzy selection is re-run on the training rows of each fold. Fold ``f``
    seeds its models with ``derive_seed(eval_config.rng_seed, f)``.
    The model fitted for the best fold is kept as ``best_model``.

    Raises:
        SingleClassError: If a held-out fold contains a single class
    """
    fuzzy_config = fuzzy_config or FuzzyConfig()
    wgcna_config = wgcna_config or WgcnaConfig()
    eval_config = eval_config or EvalConfig()
    y = data.require_labels()
    if folds.assignment.shape != (data.n_rows,):
        raise InvalidConfigError("fold plan does not match the number of rows")

    per_fold = Parallel(n_jobs=n_jobs, prefer="threads")(
        delayed(_score_fold)(model, data, folds, f, fuzzy_config, wgcna_config, eval_config)
        for f in range(folds.k)
    )
    rocs = [roc_curve(scores, y[folds.test_rows(f)]) for f, (scores, _, _) in enumerate(per_fold)]
    fold_aucs = [roc.auc for roc in rocs]
    best = int(np.argmax(fold_aucs))

    pooled = np.empty(data.n_rows)
    for f, (scores, _, _) in enumerate(per_fold):
        pooled[folds.test_rows(f)] = scores
    result = CvResult(
        model=model,
        fold_aucs=fold_aucs,
        best_fold=best,
        best_roc=rocs[best],
        pooled_roc=roc_curve(pooled, y),
        best_model=per_fold[best][2],
        fold_features=[features for _, features, _ in per_fold],
    )
    logger.info("cv.done", model=model.value, mean_auc=result.mean_auc, sd_auc=result.sd_auc)
    return result


def compare_models(
    data: FeatureMatrix,
    folds: FoldPlan,
    fuzzy_config: FuzzyConfig | None = None,
    wgcna_config: WgcnaConfig | None = None,
    eval_config: EvalConfig | None = None,
    n_jobs: int = 1,
) -> list[CvResult]:
    """Fuzzy top-k forest, full forest and ridge logit on the same folds."""
    return [
        cross_validate(model, data, folds, fuzzy_config, wgcna_config, eval_config, n_jobs)
        for model in ModelKind
    ]
