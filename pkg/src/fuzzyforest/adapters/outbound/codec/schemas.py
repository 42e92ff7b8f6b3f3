"""Pydantic schemas for JSON artifacts."""

from typing import Literal

from pydantic import BaseModel, Field

FORMAT_VERSION = 1


class TreeParamsSchema(BaseModel):
    """CART hyperparameters as stored."""

    mtry: int | None = Field(default=None, ge=1)
    max_depth: int | None = Field(default=None, ge=0)
    min_leaf: int = Field(default=1, ge=1)
    min_split: int = Field(default=2, ge=2)


class TreeSchema(BaseModel):
    """One flattened tree; node i is a leaf when feature[i] == -1."""

    feature: list[int]
    threshold: list[float]
    left: list[int]
    right: list[int]
    value: list[tuple[float, float]]
    in_bag: list[int]
    oob: list[int]


class ForestDocument(BaseModel):
    """Versioned forest file."""

    format_version: Literal[1] = FORMAT_VERSION
    seed: int
    n_columns: int = Field(..., ge=1)
    features: list[int]
    feature_names: list[str]
    params: TreeParamsSchema
    trees: list[TreeSchema] = Field(..., min_length=1)


class ColumnMetaSchema(BaseModel):
    """Provenance of one encoded column."""

    name: str
    source: str
    category: str


class MissingnessSchema(BaseModel):
    """Missing-cell fractions."""

    overall: float
    n_missing: int
    n_cells: int
    per_column: dict[str, float]


class EncodedMeta(BaseModel):
    """Sidecar of an encoded matrix."""

    n_rows: int
    n_features: int
    label_column: str | None
    weight_column: str | None
    columns: list[ColumnMetaSchema]
    missingness: MissingnessSchema
    cells_imputed: int


class ScaleFreeFitSchema(BaseModel):
    beta: int
    r2: float
    slope: float
    mean_connectivity: float


class ModuleSchema(BaseModel):
    module_id: int
    color: str
    size: int
    features: list[str]


class ModulesDocument(BaseModel):
    """Module formation summary."""

    beta: int
    cut_height: float
    min_module_size: int
    soft_threshold: list[ScaleFreeFitSchema]
    modules: list[ModuleSchema]
    adjusted_rand_index: float | None = None
    warnings: list[str] = Field(default_factory=list)


class RfeRoundSchema(BaseModel):
    features: list[int]
    importance: list[float]
    oob_error: float
    dropped: list[int]
    n_trees: int
    mtry: int


class RfeTraceSchema(BaseModel):
    stop_target: int
    sizes: list[int]
    rounds: list[RfeRoundSchema]
    warnings: list[str] = Field(default_factory=list)


class RankedFeatureSchema(BaseModel):
    rank: int
    index: int
    name: str
    vim: float
    module_color: str


class FuzzyResultDocument(BaseModel):
    """Audit trail of a Fuzzy Forests run."""

    format_version: Literal[1] = FORMAT_VERSION
    beta: int
    module_ids: list[int]
    module_colors: dict[str, str]
    screening: dict[str, RfeTraceSchema]
    survivors: list[int]
    selection: RfeTraceSchema
    ranked: list[RankedFeatureSchema]
    composition: dict[str, int]
    forest_features: list[int]
    recovery_rate: float | None = None
    warnings: list[str] = Field(default_factory=list)


class ModelScoreSchema(BaseModel):
    model: str
    fold_aucs: list[float]
    mean_auc: float
    sd_auc: float
    best_fold: int
    best_auc: float
    pooled_auc: float


class EvaluationDocument(BaseModel):
    """Cross-validated model comparison."""

    k: int
    stratified: bool
    fold_sizes: list[int]
    models: list[ModelScoreSchema]
    saved_forest_auc: float | None = None
    warnings: list[str] = Field(default_factory=list)


class TruthDocument(BaseModel):
    """Ground truth of a synthetic dataset."""

    variables: list[str]
    blocks: list[int]
    informative: list[str]
