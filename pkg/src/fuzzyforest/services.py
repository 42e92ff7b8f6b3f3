"""Use-case services behind the CLI commands."""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd
import structlog

from fuzzyforest.adapters.outbound.codec.schemas import (
    ColumnMetaSchema,
    EncodedMeta,
    EvaluationDocument,
    FuzzyResultDocument,
    MissingnessSchema,
    ModelScoreSchema,
    ModulesDocument,
    ModuleSchema,
    RankedFeatureSchema,
    RfeRoundSchema,
    RfeTraceSchema,
    ScaleFreeFitSchema,
    TruthDocument,
)
from fuzzyforest.domain.data_pipeline import (
    generate_synthetic,
    impute_pmm,
    informative_columns,
    mask_cells,
    missingness_report,
    one_hot_encode,
    planted_blocks,
    to_raw_table,
    variable_names,
)
from fuzzyforest.domain.errors import InvalidConfigError
from fuzzyforest.domain.evaluation import compare_models, kfold_split, score_forest
from fuzzyforest.domain.fuzzy_forests import module_composition, run_pipeline
from fuzzyforest.domain.models import (
    ColumnKind,
    FeatureMatrix,
    FuzzyResult,
    MissingnessReport,
    RawTable,
    RfeTrace,
)
from fuzzyforest.domain.ports import (
    ArtifactStorePort,
    ForestCodecPort,
    PlotRendererPort,
    TableSourcePort,
)
from fuzzyforest.domain.wgcna import adjusted_rand_index, form_modules, module_summary
from fuzzyforest.settings import RunConfig

logger = structlog.get_logger(__name__)

MODEL_TITLES = {"fuzzy_rf": "Fuzzy Forests top-k RF", "full_rf": "Full-feature RF", "logit": "Ridge logit"}


@dataclass
class PreparedData:
    """Raw, imputed and encoded views of one input table."""

    raw: RawTable
    complete: RawTable
    matrix: FeatureMatrix
    report: MissingnessReport
    cells_imputed: int


@dataclass
class CommandOutcome:
    """What a command wrote and what it has to tell the user."""

    command: str
    artifacts: list[Path] = field(default_factory=list)
    lines: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)


class DatasetPreparer:
    """Load -> impute -> encode, shared by every analysis command."""

    def __init__(self, source: TableSourcePort) -> None:
        self.source = source

    def prepare(self, config: RunConfig) -> PreparedData:
        raw = self.source.read(config.require_input(), sentinels=config.missing_sentinels)
        for column in (config.label_column, config.weight_column):
            if column is not None and column not in raw.kinds:
                raise InvalidConfigError(f"Column '{column}' not found in {config.input_path}")
        report = missingness_report(raw)
        complete = impute_pmm(raw, config.impute_config())
        matrix = one_hot_encode(
            complete,
            label_column=config.label_column,
            weight_column=config.weight_column,
            positive_label=config.positive_label,
        )
        imputed = int((raw.missing_mask() & ~complete.missing_mask()).sum())
        return PreparedData(raw, complete, matrix, report, imputed)


def _load_truth(store: ArtifactStorePort, config: RunConfig) -> TruthDocument | None:
    if config.truth_path is None:
        return None
    return TruthDocument.model_validate(store.read_json(config.truth_path))


def _trace_schema(trace: RfeTrace) -> RfeTraceSchema:
    return RfeTraceSchema(
        stop_target=trace.stop_target,
        sizes=trace.sizes,
        rounds=[
            RfeRoundSchema(
                features=r.features.tolist(),
                importance=r.vim.importance.tolist(),
                oob_error=r.oob_error,
                dropped=r.dropped.tolist(),
                n_trees=r.n_trees,
                mtry=r.mtry,
            )
            for r in trace.rounds
        ],
        warnings=list(trace.warnings),
    )


class SynthesizeData:
    """Service for writing planted-block synthetic datasets."""

    def __init__(self, store: ArtifactStorePort) -> None:
        self.store = store

    def run(self, config: RunConfig) -> CommandOutcome:
        synth = config.synth_config()
        header = config.artifact_header("synth")
        matrix = generate_synthetic(synth)
        table = to_raw_table(matrix, label_column=config.label_column)
        masked = 0
        if config.mask_fraction > 0:
            table, masked = mask_cells(
                table, config.mask_fraction, config.seed, protected=[config.label_column]
            )

        names = variable_names(synth)
        truth = TruthDocument(
            variables=names,
            blocks=planted_blocks(synth).tolist(),
            informative=[names[j] for j in informative_columns(synth)],
        )
        outcome = CommandOutcome(command="synth")
        outcome.artifacts.append(self.store.write_table("synthetic.csv", table.frame, header))
        outcome.artifacts.append(
            self.store.write_json("truth.json", truth.model_dump(mode="json"), header)
        )
        n, p = table.shape
        outcome.lines.append(f"Wrote {n} rows x {p - 1} variables + label ({masked} cells masked)")
        return outcome


class IngestTable:
    """Service for encoding a raw survey table."""

    def __init__(self, preparer: DatasetPreparer, store: ArtifactStorePort) -> None:
        self.preparer = preparer
        self.store = store

    def run(self, config: RunConfig, prepared: PreparedData | None = None) -> CommandOutcome:
        data = prepared or self.preparer.prepare(config)
        header = config.artifact_header("ingest")
        matrix = data.matrix

        frame = pd.DataFrame(matrix.values, columns=matrix.columns)
        if matrix.labels is not None:
            frame[config.label_column] = matrix.labels
        if matrix.weights is not None and config.weight_column:
            frame[config.weight_column] = matrix.weights

        meta = EncodedMeta(
            n_rows=matrix.n_rows,
            n_features=matrix.n_features,
            label_column=config.label_column,
            weight_column=config.weight_column,
            columns=[
                ColumnMetaSchema(name=m.name, source=m.source, category=m.category)
                for m in matrix.column_meta
            ],
            missingness=MissingnessSchema(
                overall=data.report.overall,
                n_missing=data.report.n_missing,
                n_cells=data.report.n_cells,
                per_column=data.report.per_column,
            ),
            cells_imputed=data.cells_imputed,
        )
        outcome = CommandOutcome(command="ingest")
        outcome.artifacts.append(self.store.write_table("encoded.csv", frame, header))
        outcome.artifacts.append(
            self.store.write_json("encoded_meta.json", meta.model_dump(mode="json"), header)
        )
        outcome.lines.append(
            f"Missingness: {100 * data.report.overall:.2f}% "
            f"({data.report.n_missing} of {data.report.n_cells} cells)"
        )
        outcome.lines.append(
            f"Encoded {matrix.n_rows} rows x {matrix.n_features} features "
            f"({data.cells_imputed} cells imputed)"
        )
        return outcome


class FormModules:
    """Service for WGCNA module formation."""

    def __init__(
        self, preparer: DatasetPreparer, store: ArtifactStorePort, renderer: PlotRendererPort
    ) -> None:
        self.preparer = preparer
        self.store = store
        self.renderer = renderer

    def run(self, config: RunConfig, prepared: PreparedData | None = None) -> CommandOutcome:
        data = prepared or self.preparer.prepare(config)
        header = config.artifact_header("modules")
        log = logger.bind(features=data.matrix.n_features)
        log.info("modules.run.start")
        formation = form_modules(data.matrix, config.wgcna_config())
        partition = formation.partition

        ari = None
        truth = _load_truth(self.store, config)
        if truth is not None:
            planted = dict(zip(truth.variables, truth.blocks, strict=True))
            expected = [planted.get(m.source, 0) for m in data.matrix.column_meta]
            ari = adjusted_rand_index(partition.module_ids, expected)

        membership = pd.DataFrame(
            {
                "feature": partition.feature_names,
                "source": [m.source for m in data.matrix.column_meta],
                "module_id": partition.module_ids,
                "color": [partition.color_of_feature(j) for j in range(partition.n_features)],
            }
        )
        document = ModulesDocument(
            beta=formation.beta,
            cut_height=partition.cut_height,
            min_module_size=partition.min_module_size,
            soft_threshold=[
                ScaleFreeFitSchema(
                    beta=f.beta, r2=f.r2, slope=f.slope, mean_connectivity=f.mean_connectivity
                )
                for f in formation.fit_table
            ],
            modules=[ModuleSchema.model_validate(entry) for entry in module_summary(partition)],
            adjusted_rand_index=ari,
            warnings=formation.warnings,
        )
        outcome = CommandOutcome(command="modules", warnings=list(formation.warnings))
        outcome.artifacts += [
            self.store.write_table("modules.csv", membership, header),
            self.store.write_json("modules.json", document.model_dump(mode="json"), header),
            self.store.write_svg(
                "dendrogram.svg", self.renderer.dendrogram(formation.dendrogram, partition), header
            ),
        ]
        if config.audit_matrices:
            names = partition.feature_names
            for name, matrix in (("adjacency.csv", formation.adjacency), ("tom.csv", formation.tom)):
                frame = pd.DataFrame(matrix, columns=names)
                frame.insert(0, "feature", names)
                outcome.artifacts.append(self.store.write_table(name, frame, header))
        sizes = ", ".join(
            f"{entry['color']}={entry['size']}" for entry in module_summary(partition)
        )
        outcome.lines.append(f"beta={formation.beta}; modules: {sizes}")
        if ari is not None:
            outcome.lines.append(f"Adjusted Rand index vs planted blocks: {ari:.3f}")
        return outcome


class SelectFeatures:
    """Service for the full Fuzzy Forests selection run."""

    def __init__(
        self, preparer: DatasetPreparer, store: ArtifactStorePort, codec: ForestCodecPort
    ) -> None:
        self.preparer = preparer
        self.store = store
        self.codec = codec

    def run(self, config: RunConfig, prepared: PreparedData | None = None) -> CommandOutcome:
        data = prepared or self.preparer.prepare(config)
        header = config.artifact_header("select")
        result = run_pipeline(
            data.matrix, config.wgcna_config(), config.fuzzy_config(), n_jobs=config.threads
        )

        recovery = None
        truth = _load_truth(self.store, config)
        if truth is not None and truth.informative:
            chosen = {data.matrix.column_meta[f.index].source for f in result.ranked}
            hits = sum(1 for name in truth.informative if name in chosen)
            recovery = hits / len(truth.informative)

        outcome = CommandOutcome(command="select", warnings=list(result.warnings))
        outcome.artifacts += [
            self.store.write_table("top_features.csv", self._ranking_frame(result), header),
            self.store.write_json(
                "selection.json", self._document(result, recovery).model_dump(mode="json"), header
            ),
            self.store.write_json("forest.json", self.codec.encode(result.forest), header),
        ]
        shares = ", ".join(f"{color}={count}" for color, count in module_composition(result))
        outcome.lines.append(
            f"Selected {len(result.ranked)} of {data.matrix.n_features} features "
            f"({result.screening.survivors.size} survived screening); by module: {shares}"
        )
        for feature in result.ranked[:10]:
            outcome.lines.append(
                f"  {feature.rank:>3}  {feature.name}  vim={feature.vim:.4f}  {feature.module_color}"
            )
        if recovery is not None:
            outcome.lines.append(f"Recovered informative features: {recovery:.0%}")
        return outcome

    @staticmethod
    def _ranking_frame(result: FuzzyResult) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "rank": [f.rank for f in result.ranked],
                "feature": [f.name for f in result.ranked],
                "vim": [f.vim for f in result.ranked],
                "module_color": [f.module_color for f in result.ranked],
            }
        )

    @staticmethod
    def _document(result: FuzzyResult, recovery: float | None) -> FuzzyResultDocument:
        partition = result.partition
        return FuzzyResultDocument(
            beta=result.formation.beta,
            module_ids=partition.module_ids.tolist(),
            module_colors={str(k): v for k, v in sorted(partition.colors.items())},
            screening={
                partition.colors.get(m, str(m)): _trace_schema(t)
                for m, t in sorted(result.screening.traces.items())
            },
            survivors=result.screening.survivors.tolist(),
            selection=_trace_schema(result.selection.trace),
            ranked=[
                RankedFeatureSchema(
                    rank=f.rank, index=f.index, name=f.name, vim=f.vim, module_color=f.module_color
                )
                for f in result.ranked
            ],
            composition=dict(module_composition(result)),
            forest_features=result.forest.features.tolist(),
            recovery_rate=recovery,
            warnings=result.warnings,
        )


class EvaluateModels:
    """Service for the cross-validated three-model comparison."""

    def __init__(
        self,
        preparer: DatasetPreparer,
        store: ArtifactStorePort,
        renderer: PlotRendererPort,
        codec: ForestCodecPort,
    ) -> None:
        self.preparer = preparer
        self.store = store
        self.renderer = renderer
        self.codec = codec

    def run(self, config: RunConfig, prepared: PreparedData | None = None) -> CommandOutcome:
        data = prepared or self.preparer.prepare(config)
        header = config.artifact_header("evaluate")
        matrix = data.matrix
        eval_config = config.eval_config()
        folds = kfold_split(
            matrix.n_rows, eval_config.k, matrix.require_labels(), eval_config.stratified, config.seed
        )
        results = compare_models(
            matrix,
            folds,
            config.fuzzy_config(),
            config.wgcna_config(),
            eval_config,
            n_jobs=config.threads,
        )

        saved_auc = None
        if config.forest_path is not None:
            forest = self.codec.decode(self.store.read_json(config.forest_path))
            saved_auc = score_forest(forest, matrix).auc

        aucs = pd.DataFrame(
            [
                {"model": r.model.value, "fold": fold, "auc": auc}
                for r in results
                for fold, auc in enumerate(r.fold_aucs)
            ]
        )
        points: list[dict[str, Any]] = []
        for r in results:
            for curve_name, curve in (("pooled", r.pooled_roc), ("best_fold", r.best_roc)):
                points.extend(
                    {
                        "model": r.model.value,
                        "curve": curve_name,
                        "fpr": float(f),
                        "tpr": float(t),
                        "threshold": float(h),
                    }
                    for f, t, h in zip(curve.fpr, curve.tpr, curve.thresholds, strict=True)
                )
        document = EvaluationDocument(
            k=folds.k,
            stratified=folds.stratified,
            fold_sizes=folds.sizes(),
            models=[
                ModelScoreSchema(
                    model=r.model.value,
                    fold_aucs=r.fold_aucs,
                    mean_auc=r.mean_auc,
                    sd_auc=r.sd_auc,
                    best_fold=r.best_fold,
                    best_auc=r.best_roc.auc,
                    pooled_auc=r.pooled_roc.auc,
                )
                for r in results
            ],
            saved_forest_auc=saved_auc,
            warnings=list(folds.warnings),
        )
        svg = self.renderer.roc_overlay(
            {MODEL_TITLES[r.model.value]: r.best_roc for r in results},
            title=f"ROC of the best fold per model ({folds.k}-fold CV)",
        )

        outcome = CommandOutcome(command="evaluate", warnings=list(folds.warnings))
        outcome.artifacts += [
            self.store.write_table("auc_table.csv", aucs, header),
            self.store.write_table("roc_points.csv", pd.DataFrame(points), header),
            self.store.write_json("evaluation.json", document.model_dump(mode="json"), header),
            self.store.write_svg("roc.svg", svg, header),
        ]
        for r in results:
            outcome.lines.append(
                f"{r.model.value:<9} mean AUC {r.mean_auc:.3f} +/- {r.sd_auc:.3f} "
                f"(best fold {r.best_fold}: {r.best_roc.auc:.3f})"
            )
        if saved_auc is not None:
            outcome.lines.append(f"Saved forest AUC on input: {saved_auc:.3f}")
        return outcome


def _level_text(value: object) -> str:
    if isinstance(value, float):
        return format(value, "g")
    return str(value)


class CrosstabReport:
    """Service for outcome breakdowns by categorical variables."""

    def __init__(self, preparer: DatasetPreparer, store: ArtifactStorePort) -> None:
        self.preparer = preparer
        self.store = store

    def table(self, config: RunConfig, data: PreparedData) -> pd.DataFrame:
        """
        Long table of (variable, level, label) counts over the imputed table.

        ``proportion`` is the weighted share of each label within its level.
        """
        complete = data.complete
        special = {config.label_column, config.weight_column}
        variables = config.crosstab_variables or [
            name
            for name in complete.columns
            if name not in special and complete.kinds[name] is ColumnKind.CATEGORICAL
        ]
        unknown = [v for v in variables if v not in complete.kinds]
        if unknown:
            raise InvalidConfigError(f"Unknown crosstab variables: {unknown}")

        labels = complete.frame[config.label_column].map(_level_text)
        weights = (
            complete.frame[config.weight_column].to_numpy(dtype=np.float64)
            if config.weight_column
            else np.ones(len(labels))
        )
        rows = []
        for variable in variables:
            frame = pd.DataFrame(
                {
                    "level": complete.frame[variable].map(_level_text),
                    "label": labels,
                    "weight": weights,
                }
            )
            grouped = (
                frame.groupby(["level", "label"], sort=True)["weight"]
                .agg(["size", "sum"])
                .reset_index()
            )
            level_totals = grouped.groupby("level")["sum"].transform("sum")
            grouped["proportion"] = np.where(level_totals > 0, grouped["sum"] / level_totals, 0.0)
            grouped.insert(0, "variable", variable)
            rows.append(grouped.rename(columns={"size": "count", "sum": "weighted_count"}))
        columns = ["variable", "level", "label", "count", "weighted_count", "proportion"]
        return pd.concat(rows, ignore_index=True) if rows else pd.DataFrame(columns=columns)

    def run(self, config: RunConfig, prepared: PreparedData | None = None) -> CommandOutcome:
        data = prepared or self.preparer.prepare(config)
        header = config.artifact_header("crosstab")
        table = self.table(config, data)
        outcome = CommandOutcome(command="crosstab")
        outcome.artifacts.append(self.store.write_table("crosstab.csv", table, header))
        for variable, block in table.groupby("variable", sort=False):
            cells = ", ".join(
                f"{row.level}/{row.label}: {row.weighted_count:g}" for row in block.itertuples()
            )
            outcome.lines.append(f"{variable}: {cells}")
        return outcome
