"""Fuzzy Forests: per-module RFE-RF screening, aggregate selection, final fit."""

from __future__ import annotations

import math
from collections import Counter
from collections.abc import Sequence

import numpy as np
import structlog
from joblib import Parallel, delayed

from fuzzyforest.domain.errors import (
    EmptyFeatureSetError,
    InvalidConfigError,
    NoSurvivorsError,
    PartitionMismatchError,
)
from fuzzyforest.domain.models import (
    GREY_MODULE,
    FeatureMatrix,
    FuzzyConfig,
    FuzzyResult,
    IntArray,
    ModulePartition,
    RankedFeature,
    RfeRound,
    RfeTrace,
    ScreeningResult,
    SelectionResult,
    TreeParams,
    WgcnaConfig,
)
from fuzzyforest.domain.random_forest import derive_seed, fit_forest, oob_error, permutation_vim
from fuzzyforest.domain.wgcna import form_modules

logger = structlog.get_logger(__name__)

# stage keys for derive_seed
SCREENING_STAGE = 0
SELECTION_STAGE = 1
FINAL_STAGE = 2


def _ceil(x: float) -> int:
    # 0.75 * 12 must give 9, not 10
    return math.ceil(round(x, 9))


def survivor_count(current: int, stop_target: int, drop_fraction: float) -> int:
    """
    Features kept after one elimination round.

    max(stop_target, ceil((1 - drop_fraction) * current)), reduced by one when
    that would keep everything and ``current`` is still above the target.
    """
    keep = max(stop_target, _ceil((1.0 - drop_fraction) * current))
    if keep >= current and current > stop_target:
        keep = current - 1
    return min(keep, current)


def rfe_rf(
    features: Sequence[int] | IntArray,
    data: FeatureMatrix,
    drop_fraction: float,
    stop_target: int,
    trees: int,
    seed: int,
    params: TreeParams | None = None,
    n_jobs: int = 1,
) -> RfeTrace:
    """
    Recursive feature elimination with random forests.

    Each round fits a forest on the current set, ranks features by permutation
    VIM and keeps the ``survivor_count`` best (ties by column index). Round
    ``r`` uses the streams ``derive_seed(seed, r)``. The last round holds the
    ``stop_target`` survivors and their importances.

    Raises:
        EmptyFeatureSetError: If ``features`` is empty
        InvalidConfigError: If ``stop_target`` < 1 or ``drop_fraction`` is outside (0, 1)
    """
    current = np.unique(np.asarray(features, dtype=np.int64))
    if current.size == 0:
        raise EmptyFeatureSetError("RFE-RF needs at least one feature")
    if stop_target < 1:
        raise InvalidConfigError("stop_target must be >= 1")
    if not 0.0 < drop_fraction < 1.0:
        raise InvalidConfigError("drop_fraction must lie in (0, 1)")
    params = params or TreeParams()

    warnings: list[str] = []
    target = stop_target
    if stop_target > current.size:
        warnings.append(
            f"stop_target {stop_target} exceeds the {current.size} available features; "
            "returning the input set unchanged"
        )
        logger.warning("rfe.target_too_large", stop_target=stop_target, features=int(current.size))
        target = int(current.size)

    rounds: list[RfeRound] = []
    while True:
        round_seed = derive_seed(seed, len(rounds))
        forest = fit_forest(data, current, trees, params, round_seed, n_jobs=n_jobs)
        vim = permutation_vim(forest, data, derive_seed(round_seed, 1), n_jobs=n_jobs)
        error = oob_error(forest, data)
        if current.size == target:
            keep = current.size
        else:
            keep = survivor_count(int(current.size), target, drop_fraction)
        ranking = vim.ranking
        survivors = np.sort(ranking[:keep])
        dropped = np.sort(ranking[keep:])
        rounds.append(
            RfeRound(
                features=current,
                vim=vim,
                oob_error=error,
                dropped=dropped,
                n_trees=trees,
                mtry=int(forest.params.mtry or 0),
            )
        )
        logger.debug(
            "rfe.round", round=len(rounds), size=int(current.size), keep=keep, oob_error=error
        )
        if dropped.size == 0:
            break
        current = survivors

    return RfeTrace(rounds=rounds, stop_target=stop_target, warnings=warnings)


def module_stop_target(size: int, keep_fraction: float) -> int:
    return max(1, _ceil(keep_fraction * size))


def _check_partition(partition: ModulePartition, data: FeatureMatrix) -> None:
    if partition.n_features != data.n_features:
        raise PartitionMismatchError(
            f"Partition covers {partition.n_features} features, the matrix has {data.n_features}"
        )
    if list(partition.feature_names) != data.columns:
        raise PartitionMismatchError("Partition feature names do not match the matrix columns")


def screen_modules(
    partition: ModulePartition, data: FeatureMatrix, config: FuzzyConfig, n_jobs: int = 1
) -> ScreeningResult:
    """
    Run RFE-RF inside every non-grey module and pool the survivors.

    Module ``m`` keeps ``max(1, ceil(keep_fraction * |m|))`` features and uses
    the streams ``derive_seed(rng_seed, SCREENING_STAGE, m)``, so modules run
    in parallel without changing the result. Grey is screened as one extra
    module only when ``screen_grey`` is set.

    Raises:
        PartitionMismatchError: If the partition does not cover the matrix columns
    """
    _check_partition(partition, data)
    modules = list(partition.module_numbers)
    if config.screen_grey and partition.members(GREY_MODULE).size:
        modules.append(GREY_MODULE)

    warnings: list[str] = []
    if not modules:
        warnings.append("Every feature is grey; nothing to screen")
        logger.warning("screen.empty", features=partition.n_features)
        return ScreeningResult(
            survivors=np.zeros(0, dtype=np.int64), traces={}, warnings=warnings
        )

    def screen(module_id: int) -> RfeTrace:
        members = partition.members(module_id)
        return rfe_rf(
            members,
            data,
            config.drop_fraction,
            module_stop_target(int(members.size), config.keep_fraction),
            config.screening_trees,
            derive_seed(config.rng_seed, SCREENING_STAGE, module_id),
            config.tree_params,
        )

    results: list[RfeTrace] = Parallel(n_jobs=n_jobs, prefer="threads")(
        delayed(screen)(m) for m in modules
    )
    traces = dict(zip(modules, results, strict=True))
    for trace in results:
        warnings.extend(trace.warnings)
    survivors = np.unique(np.concatenate([t.survivors for t in results])).astype(np.int64)
    logger.info("screen.done", modules=len(modules), survivors=int(survivors.size))
    return ScreeningResult(survivors=survivors, traces=traces, warnings=warnings)


def select_features(
    survivors: Sequence[int] | IntArray,
    data: FeatureMatrix,
    config: FuzzyConfig,
    partition: ModulePartition | None = None,
    n_jobs: int = 1,
) -> tuple[SelectionResult, list[str]]:
    """
    RFE-RF over the pooled survivors down to ``final_k`` and the final ranking.

    The ranking is the VIM order of the last round's forest. Returns the
    selection and any warnings (``final_k`` larger than the survivor set).

    Raises:
        NoSurvivorsError: If ``survivors`` is empty
    """
    pool = np.unique(np.asarray(survivors, dtype=np.int64))
    if pool.size == 0:
        raise NoSurvivorsError("Screening left no features to select from")
    warnings: list[str] = []
    target = config.final_k
    if target > pool.size:
        warnings.append(
            f"final_k={config.final_k} exceeds the {pool.size} screened features; ranking all"
        )
        logger.warning("select.final_k_too_large", final_k=config.final_k, survivors=int(pool.size))
        target = int(pool.size)

    trace = rfe_rf(
        pool,
        data,
        config.drop_fraction,
        target,
        config.selection_trees,
        derive_seed(config.rng_seed, SELECTION_STAGE),
        config.tree_params,
        n_jobs=n_jobs,
    )
    last = trace.rounds[-1].vim
    names = data.columns
    ranked = [
        RankedFeature(
            rank=position + 1,
            index=int(feature),
            name=names[feature],
            vim=last.importance_of(int(feature)),
            module_color=partition.color_of_feature(int(feature)) if partition else "",
        )
        for position, feature in enumerate(last.ranking)
    ]
    return SelectionResult(trace=trace, ranked=ranked), warnings


def run_pipeline(
    data: FeatureMatrix,
    wgcna_config: WgcnaConfig,
    fuzzy_config: FuzzyConfig,
    n_jobs: int = 1,
) -> FuzzyResult:
    """
    Module formation, screening, selection and a final forest on the top features.

    The final forest is a fresh fit on exactly the ranked features with the
    selection-stage tree count.

    Raises:
        NoSurvivorsError: If screening keeps no feature
    """
    data.require_labels()
    log = logger.bind(features=data.n_features, rows=data.n_rows, seed=fuzzy_config.rng_seed)
    log.info("pipeline.start")

    formation = form_modules(data, wgcna_config)
    screening = screen_modules(formation.partition, data, fuzzy_config, n_jobs=n_jobs)
    if screening.survivors.size == 0:
        raise NoSurvivorsError(
            "Screening kept no features; every feature is grey (set screen_grey or lower "
            "min_module_size)"
        )
    selection, selection_warnings = select_features(
        screening.survivors, data, fuzzy_config, formation.partition, n_jobs=n_jobs
    )
    top = np.array([f.index for f in selection.ranked], dtype=np.int64)
    forest = fit_forest(
        data,
        top,
        fuzzy_config.selection_trees,
        fuzzy_config.tree_params,
        derive_seed(fuzzy_config.rng_seed, FINAL_STAGE),
        n_jobs=n_jobs,
    )
    warnings = [
        *formation.warnings,
        *screening.warnings,
        *selection.trace.warnings,
        *selection_warnings,
    ]
    log.info("pipeline.done", selected=int(top.size), warnings=len(warnings))
    return FuzzyResult(
        formation=formation,
        screening=screening,
        selection=selection,
        forest=forest,
        config=fuzzy_config,
        wgcna_config=wgcna_config,
        warnings=warnings,
    )


def module_composition(result: FuzzyResult) -> list[tuple[str, int]]:
    """(module color, number of top features) pairs, largest share first."""
    counts = Counter(f.module_color for f in result.ranked)
    return sorted(counts.items(), key=lambda item: (-item[1], item[0]))
