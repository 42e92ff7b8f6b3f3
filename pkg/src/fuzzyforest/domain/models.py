"""Domain models for fuzzyforest."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Literal

import numpy as np
import pandas as pd
from numpy.typing import NDArray

from fuzzyforest.domain.errors import InvalidConfigError

FloatArray = NDArray[np.float64]
IntArray = NDArray[np.int64]
BoolArray = NDArray[np.bool_]

NUMERIC_CATEGORY = "numeric"
GREY_MODULE = 0
GREY_COLOR = "grey"
DEFAULT_SENTINELS: tuple[str, ...] = ("", "NA")


class ColumnKind(str, Enum):
    """How a raw column is interpreted."""

    CATEGORICAL = "categorical"
    NUMERIC = "numeric"


class ModelKind(str, Enum):
    """Model specifications compared by cross-validation."""

    FUZZY_RF = "fuzzy_rf"
    FULL_RF = "full_rf"
    LOGIT = "logit"


# ---------------------------------------------------------------------------
# data_pipeline
# ---------------------------------------------------------------------------


@dataclass
class RawTable:
    """Raw survey table before encoding.

    Categorical columns hold ``str`` cells and numeric columns hold floats.
    A MISSING cell is any null (``None``/``NaN``) in ``frame``.
    """

    frame: pd.DataFrame
    kinds: dict[str, ColumnKind]

    def __post_init__(self) -> None:
        names = list(self.frame.columns)
        if len(set(names)) != len(names):
            raise InvalidConfigError(f"Column names must be unique: {names}")
        unknown = set(names) - set(self.kinds)
        if unknown:
            raise InvalidConfigError(f"No column kind for {sorted(unknown)}")

    @property
    def shape(self) -> tuple[int, int]:
        n, p = self.frame.shape
        return int(n), int(p)

    @property
    def columns(self) -> list[str]:
        return [str(c) for c in self.frame.columns]

    def missing_mask(self) -> BoolArray:
        """Boolean n×p mask of MISSING cells."""
        return np.asarray(self.frame.isna().to_numpy(), dtype=bool)

    def is_complete(self) -> bool:
        return not bool(self.missing_mask().any())


@dataclass(frozen=True)
class ColumnMeta:
    """Provenance of one encoded column."""

    source: str
    category: str

    @property
    def name(self) -> str:
        if self.category == NUMERIC_CATEGORY:
            return self.source
        return f"{self.source}={self.category}"

    @property
    def is_indicator(self) -> bool:
        return self.category != NUMERIC_CATEGORY


@dataclass
class FeatureMatrix:
    """Encoded n×p design matrix with provenance, labels and weights."""

    values: FloatArray
    column_meta: list[ColumnMeta]
    labels: IntArray | None = None
    weights: FloatArray | None = None

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise InvalidConfigError("FeatureMatrix values must be two-dimensional")
        n, p = self.values.shape
        if len(self.column_meta) != p:
            raise InvalidConfigError(
                f"column_meta has {len(self.column_meta)} entries for {p} columns"
            )
        if np.isnan(self.values).any():
            raise InvalidConfigError("FeatureMatrix cannot contain missing values")
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=np.int64)
            if self.labels.shape != (n,):
                raise InvalidConfigError("labels must have one entry per row")
            if not np.isin(self.labels, (0, 1)).all():
                raise InvalidConfigError("labels must be binary (0/1)")
        if self.weights is not None:
            self.weights = np.asarray(self.weights, dtype=np.float64)
            if self.weights.shape != (n,):
                raise InvalidConfigError("weights must have one entry per row")
            if (self.weights < 0).any() or not (self.weights > 0).any():
                raise InvalidConfigError("weights must be >= 0 with at least one > 0")

    @property
    def n_rows(self) -> int:
        return int(self.values.shape[0])

    @property
    def n_features(self) -> int:
        return int(self.values.shape[1])

    @property
    def columns(self) -> list[str]:
        return [meta.name for meta in self.column_meta]

    def require_labels(self) -> IntArray:
        if self.labels is None:
            raise InvalidConfigError("This operation needs a labeled FeatureMatrix")
        return self.labels

    def subset_rows(self, rows: IntArray) -> FeatureMatrix:
        """Return the matrix restricted to ``rows`` (in the given order)."""
        return FeatureMatrix(
            values=self.values[rows],
            column_meta=list(self.column_meta),
            labels=None if self.labels is None else self.labels[rows],
            weights=None if self.weights is None else self.weights[rows],
        )


@dataclass(frozen=True)
class MissingnessReport:
    """Per-column and overall fraction of MISSING cells."""

    per_column: dict[str, float]
    n_missing: int
    n_cells: int

    @property
    def overall(self) -> float:
        return self.n_missing / self.n_cells if self.n_cells else 0.0


@dataclass(frozen=True)
class ImputeConfig:
    """Predictive mean matching settings."""

    donor_pool_size: int = 5
    rng_seed: int = 0
    covariates: tuple[str, ...] | None = None  # None: every complete column
    exclude: tuple[str, ...] = ()  # neither imputed nor used as covariates

    def __post_init__(self) -> None:
        if self.donor_pool_size < 1:
            raise InvalidConfigError("donor_pool_size must be >= 1")


@dataclass(frozen=True)
class SynthConfig:
    """Planted block-correlation generator settings."""

    n_samples: int = 1000
    block_sizes: tuple[int, ...] = (20, 20, 20)
    rho: float = 0.7
    n_informative: int = 2
    n_informative_blocks: int | None = None
    signal_strength: float = 3.0
    noise_rate: float = 0.0
    n_noise: int = 0
    output: Literal["continuous", "indicator", "categorical"] = "continuous"
    n_levels: int = 3
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if self.n_samples < 2:
            raise InvalidConfigError("n_samples must be >= 2")
        if not self.block_sizes or any(size < 1 for size in self.block_sizes):
            raise InvalidConfigError("block sizes must all be >= 1")
        if not 0.0 <= self.rho < 1.0:
            raise InvalidConfigError("rho must lie in [0, 1)")
        if not 0.0 <= self.noise_rate < 0.5:
            raise InvalidConfigError("noise_rate must lie in [0, 0.5)")
        if self.n_noise < 0 or self.n_informative < 0:
            raise InvalidConfigError("n_noise and n_informative must be >= 0")
        if self.signal_strength < 0:
            raise InvalidConfigError("signal_strength must be >= 0")
        blocks = self.informative_block_count
        if blocks > len(self.block_sizes):
            raise InvalidConfigError("n_informative_blocks exceeds the number of blocks")
        if any(self.n_informative > size for size in self.block_sizes[:blocks]):
            raise InvalidConfigError("n_informative exceeds an informative block's size")
        if self.output == "categorical" and self.n_levels < 2:
            raise InvalidConfigError("categorical output needs n_levels >= 2")

    @property
    def informative_block_count(self) -> int:
        if self.n_informative_blocks is None:
            return len(self.block_sizes)
        return self.n_informative_blocks

    @property
    def n_features(self) -> int:
        return sum(self.block_sizes) + self.n_noise


# ---------------------------------------------------------------------------
# random_forest
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TreeParams:
    """CART hyperparameters. ``mtry=None`` means ceil(sqrt(p_subset))."""

    mtry: int | None = None
    max_depth: int | None = None
    min_leaf: int = 1
    min_split: int = 2

    def __post_init__(self) -> None:
        if self.mtry is not None and self.mtry < 1:
            raise InvalidConfigError("mtry must be >= 1")
        if self.min_leaf < 1:
            raise InvalidConfigError("min_leaf must be >= 1")
        if self.min_split < 2:
            raise InvalidConfigError("min_split must be >= 2")
        if self.max_depth is not None and self.max_depth < 0:
            raise InvalidConfigError("max_depth must be >= 0")

    def resolve_mtry(self, n_features: int) -> int:
        """Split candidates per node; a fixed ``mtry`` is capped at the subset size."""
        if n_features < 1:
            raise InvalidConfigError("mtry needs at least one feature")
        if self.mtry is None:
            return math.ceil(math.sqrt(n_features))
        return min(self.mtry, n_features)


@dataclass
class Tree:
    """Flattened CART tree.

    Node ``i`` is a leaf when ``feature[i] == -1``; rows with
    ``x[feature] <= threshold`` go left. ``value`` holds in-bag class counts.
    """

    feature: IntArray
    threshold: FloatArray
    left: IntArray
    right: IntArray
    value: FloatArray
    in_bag: IntArray
    oob: IntArray

    @property
    def n_nodes(self) -> int:
        return int(self.feature.shape[0])

    @property
    def used_features(self) -> IntArray:
        return np.unique(self.feature[self.feature >= 0])

    def leaf_probabilities(self) -> FloatArray:
        totals = self.value.sum(axis=1, keepdims=True)
        return np.divide(
            self.value, totals, out=np.zeros_like(self.value), where=totals > 0
        )


@dataclass
class Forest:
    """Bagged CART ensemble over a feature subset of a training matrix."""

    trees: list[Tree]
    features: IntArray
    feature_names: list[str]
    n_columns: int
    params: TreeParams
    seed: int

    @property
    def n_trees(self) -> int:
        return len(self.trees)


@dataclass
class VimTable:
    """Permutation importance per feature, ranked descending."""

    features: IntArray
    importance: FloatArray
    feature_names: list[str] = field(default_factory=list)

    @property
    def ranking(self) -> IntArray:
        """Feature indices by descending importance; ties by ascending index."""
        order = np.lexsort((self.features, -self.importance))
        return self.features[order]

    def importance_of(self, feature: int) -> float:
        position = int(np.flatnonzero(self.features == feature)[0])
        return float(self.importance[position])


# ---------------------------------------------------------------------------
# wgcna
# ---------------------------------------------------------------------------


@dataclass
class Dendrogram:
    """Average-linkage tree in scipy linkage format: rows ``[a, b, height, size]``."""

    linkage: FloatArray
    labels: list[str]

    @property
    def n_leaves(self) -> int:
        return len(self.labels)

    @property
    def heights(self) -> FloatArray:
        return self.linkage[:, 2] if self.linkage.size else np.zeros(0)


@dataclass
class ModulePartition:
    """Module id per feature; module 0 is grey."""

    module_ids: IntArray
    feature_names: list[str]
    colors: dict[int, str]
    cut_height: float
    min_module_size: int

    def __post_init__(self) -> None:
        if len(self.feature_names) != self.module_ids.shape[0]:
            raise InvalidConfigError("partition needs one module id per feature")

    @property
    def n_features(self) -> int:
        return int(self.module_ids.shape[0])

    @property
    def module_numbers(self) -> list[int]:
        """Non-grey module ids in label order."""
        return sorted(int(m) for m in np.unique(self.module_ids) if m != GREY_MODULE)

    def members(self, module_id: int) -> IntArray:
        return np.flatnonzero(self.module_ids == module_id).astype(np.int64)

    def color_of_feature(self, feature: int) -> str:
        return self.colors[int(self.module_ids[feature])]

    def sizes(self) -> dict[int, int]:
        ids, counts = np.unique(self.module_ids, return_counts=True)
        return {int(i): int(c) for i, c in zip(ids, counts, strict=True)}


@dataclass(frozen=True)
class ScaleFreeFit:
    """Scale-free topology fit for one soft-threshold power."""

    beta: int
    r2: float
    slope: float
    mean_connectivity: float


@dataclass(frozen=True)
class WgcnaConfig:
    """Module formation settings; ``beta=None`` selects the power automatically."""

    beta: int | None = None
    beta_candidates: tuple[int, ...] = tuple(range(1, 13))
    r2_cut: float = 0.8
    fallback_beta: int = 6
    cut_height: float | None = None
    cut_fraction: float = 0.99
    min_module_size: int = 5

    def __post_init__(self) -> None:
        if self.beta is not None and self.beta < 1:
            raise InvalidConfigError("beta must be >= 1")
        if not self.beta_candidates or min(self.beta_candidates) < 1:
            raise InvalidConfigError("beta candidates must be a nonempty list of powers >= 1")
        if self.min_module_size < 1:
            raise InvalidConfigError("min_module_size must be >= 1")
        if not 0.0 < self.cut_fraction <= 1.0:
            raise InvalidConfigError("cut_fraction must lie in (0, 1]")


@dataclass
class ModuleFormation:
    """Module partition together with the matrices it was built from."""

    partition: ModulePartition
    beta: int
    fit_table: list[ScaleFreeFit]
    similarity: FloatArray
    adjacency: FloatArray
    tom: FloatArray
    dendrogram: Dendrogram
    warnings: list[str] = field(default_factory=list)


# ---------------------------------------------------------------------------
# fuzzy_forests
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FuzzyConfig:
    """Screening and selection settings."""

    drop_fraction: float = 0.25
    keep_fraction: float = 0.25
    final_k: int = 20
    screening_trees: int = 500
    selection_trees: int = 1000
    rng_seed: int = 0
    screen_grey: bool = False
    tree_params: TreeParams = field(default_factory=TreeParams)

    def __post_init__(self) -> None:
        if not 0.0 < self.drop_fraction < 1.0:
            raise InvalidConfigError("drop_fraction must lie in (0, 1)")
        if not 0.0 < self.keep_fraction <= 1.0:
            raise InvalidConfigError("keep_fraction must lie in (0, 1]")
        if self.final_k < 1:
            raise InvalidConfigError("final_k must be >= 1")
        if self.screening_trees < 1 or self.selection_trees < 1:
            raise InvalidConfigError("tree counts must be >= 1")


@dataclass
class RfeRound:
    """One fit-rank-drop round of RFE-RF."""

    features: IntArray
    vim: VimTable
    oob_error: float
    dropped: IntArray
    n_trees: int = 0
    mtry: int = 0


@dataclass
class RfeTrace:
    """Ordered RFE-RF rounds; the last round holds the surviving set."""

    rounds: list[RfeRound]
    stop_target: int
    warnings: list[str] = field(default_factory=list)

    @property
    def survivors(self) -> IntArray:
        return self.rounds[-1].features

    @property
    def sizes(self) -> list[int]:
        return [int(r.features.shape[0]) for r in self.rounds]


@dataclass
class ScreeningResult:
    """Union of per-module survivors plus the per-module traces."""

    survivors: IntArray
    traces: dict[int, RfeTrace]
    warnings: list[str] = field(default_factory=list)


@dataclass(frozen=True)
class RankedFeature:
    """One entry of the final importance ranking."""

    rank: int
    index: int
    name: str
    vim: float
    module_color: str


@dataclass
class SelectionResult:
    """Aggregate RFE-RF over the screening survivors."""

    trace: RfeTrace
    ranked: list[RankedFeature]


@dataclass
class FuzzyResult:
    """Audit trail of a full Fuzzy Forests run."""

    formation: ModuleFormation
    screening: ScreeningResult
    selection: SelectionResult
    forest: Forest
    config: FuzzyConfig
    wgcna_config: WgcnaConfig
    warnings: list[str] = field(default_factory=list)

    @property
    def partition(self) -> ModulePartition:
        return self.formation.partition

    @property
    def ranked(self) -> list[RankedFeature]:
        return self.selection.ranked

    @property
    def selected(self) -> IntArray:
        return np.array([f.index for f in self.ranked], dtype=np.int64)


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------


@dataclass
class FoldPlan:
    """Assignment of every row to one of ``k`` folds."""

    k: int
    assignment: IntArray
    stratified: bool
    seed: int
    warnings: list[str] = field(default_factory=list)

    def test_rows(self, fold: int) -> IntArray:
        return np.flatnonzero(self.assignment == fold).astype(np.int64)

    def train_rows(self, fold: int) -> IntArray:
        return np.flatnonzero(self.assignment != fold).astype(np.int64)

    def sizes(self) -> list[int]:
        return [int((self.assignment == f).sum()) for f in range(self.k)]


@dataclass
class RocCurve:
    """ROC points from (0, 0) to (1, 1) with the area under them."""

    fpr: FloatArray
    tpr: FloatArray
    thresholds: FloatArray
    auc: float


@dataclass
class LogitModel:
    """Ridge-penalised logistic regression fit."""

    coef: FloatArray
    intercept: float
    lam: float
    iterations: int
    grad_norm: float
    converged: bool
    objective_path: list[float] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)


@dataclass(frozen=True)
class EvalConfig:
    """Cross-validation and baseline settings."""

    k: int = 10
    stratified: bool = True
    ridge_lambda: float = 1e-3
    tolerance: float = 1e-8
    max_iter: int = 100
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if self.k < 2:
            raise InvalidConfigError("k must be >= 2")
        if self.ridge_lambda < 0:
            raise InvalidConfigError("ridge_lambda must be >= 0")
        if self.max_iter < 1 or self.tolerance <= 0:
            raise InvalidConfigError("max_iter must be >= 1 and tolerance > 0")


@dataclass
class CvResult:
    """Cross-validated performance of one model specification."""

    model: ModelKind
    fold_aucs: list[float]
    best_fold: int
    best_roc: RocCurve
    pooled_roc: RocCurve
    best_model: Forest | LogitModel | None = None
    fold_features: list[list[int]] = field(default_factory=list)

    @property
    def mean_auc(self) -> float:
        return float(np.mean(self.fold_aucs))

    @property
    def sd_auc(self) -> float:
        return float(np.std(self.fold_aucs, ddof=1)) if len(self.fold_aucs) > 1 else 0.0
