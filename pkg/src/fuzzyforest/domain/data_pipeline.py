"""Survey table preparation: missingness, PMM hot-deck imputation, one-hot encoding,
and a planted-correlation synthetic generator."""

from __future__ import annotations

import math
from collections.abc import Mapping, Sequence

import numpy as np
import pandas as pd
import structlog

from fuzzyforest.domain.errors import ImputationError, InvalidConfigError, MissingValueError
from fuzzyforest.domain.models import (
    DEFAULT_SENTINELS,
    NUMERIC_CATEGORY,
    ColumnKind,
    ColumnMeta,
    FeatureMatrix,
    FloatArray,
    ImputeConfig,
    IntArray,
    MissingnessReport,
    RawTable,
    SynthConfig,
)

logger = structlog.get_logger(__name__)


# ---------------------------------------------------------------------------
# Raw tables
# ---------------------------------------------------------------------------


def _parses_as_float(cell: str) -> bool:
    try:
        float(cell)
    except ValueError:
        return False
    return True


def build_table(
    header: Sequence[str],
    rows: Sequence[Sequence[str]],
    schema: Mapping[str, ColumnKind] | None = None,
    sentinels: Sequence[str] = DEFAULT_SENTINELS,
) -> RawTable:
    """
    Build a RawTable from parsed text cells.

    Cells equal to a sentinel become MISSING. A column is numeric when every
    observed cell parses as a float, unless ``schema`` says otherwise.

    Raises:
        InvalidConfigError: If a schema hint names an unknown column or a
            numeric hint meets a non-numeric cell
    """
    schema = dict(schema or {})
    unknown = set(schema) - set(header)
    if unknown:
        raise InvalidConfigError(f"Schema names unknown columns: {sorted(unknown)}")

    missing = set(sentinels)
    data: dict[str, list[object]] = {}
    kinds: dict[str, ColumnKind] = {}
    for j, name in enumerate(header):
        cells = [row[j] for row in rows]
        observed = [c for c in cells if c not in missing]
        kind = schema.get(name)
        if kind is None:
            numeric = bool(observed) and all(_parses_as_float(c) for c in observed)
            kind = ColumnKind.NUMERIC if numeric else ColumnKind.CATEGORICAL
        if kind is ColumnKind.NUMERIC:
            bad = [c for c in observed if not _parses_as_float(c)]
            if bad:
                raise InvalidConfigError(
                    f"Column '{name}' declared numeric but holds '{bad[0]}'"
                )
            data[name] = [np.nan if c in missing else float(c) for c in cells]
        else:
            data[name] = [None if c in missing else c for c in cells]
        kinds[name] = kind

    frame = pd.DataFrame(
        {
            name: pd.Series(
                values,
                dtype="float64" if kinds[name] is ColumnKind.NUMERIC else "object",
            )
            for name, values in data.items()
        },
        columns=list(header),
    )
    return RawTable(frame=frame, kinds=kinds)


def missingness_report(table: RawTable) -> MissingnessReport:
    """Per-column and overall fraction of MISSING cells."""
    mask = table.missing_mask()
    n, p = table.shape
    per_column = {
        name: (float(mask[:, j].sum()) / n if n else 0.0)
        for j, name in enumerate(table.columns)
    }
    return MissingnessReport(per_column=per_column, n_missing=int(mask.sum()), n_cells=n * p)


def mask_cells(
    table: RawTable, fraction: float, seed: int, protected: Sequence[str] = ()
) -> tuple[RawTable, int]:
    """
    Mask round(fraction · n · p_raw) observed cells chosen uniformly at random.

    Cells of ``protected`` columns are never masked.

    Returns:
        Tuple of (masked table, number of masked cells)
    """
    if not 0.0 <= fraction < 1.0:
        raise InvalidConfigError("mask fraction must lie in [0, 1)")
    n, p = table.shape
    eligible = ~table.missing_mask()
    for name in protected:
        eligible[:, table.columns.index(name)] = False
    candidates = np.flatnonzero(eligible.ravel())
    n_mask = int(round(fraction * n * p))
    if n_mask > candidates.size:
        raise InvalidConfigError(
            f"Cannot mask {n_mask} cells; only {candidates.size} are eligible"
        )
    rng = np.random.default_rng(seed)
    chosen = np.sort(rng.choice(candidates, size=n_mask, replace=False))
    frame = table.frame.copy()
    rows, cols = np.divmod(chosen, p)
    for j in np.unique(cols):
        name = table.columns[j]
        blank = np.nan if table.kinds[name] is ColumnKind.NUMERIC else None
        frame.iloc[rows[cols == j], j] = blank
    logger.info("table.mask", cells=n_mask, fraction=fraction)
    return RawTable(frame=frame, kinds=dict(table.kinds)), n_mask


# ---------------------------------------------------------------------------
# Predictive mean matching
# ---------------------------------------------------------------------------


def _coded(series: pd.Series, kind: ColumnKind) -> FloatArray:
    """Numeric view of a column; categoricals become first-appearance integer codes."""
    if kind is ColumnKind.NUMERIC:
        return series.to_numpy(dtype=np.float64)
    codes, _ = pd.factorize(series, sort=False)
    coded = codes.astype(np.float64)
    coded[codes < 0] = np.nan
    return coded


def impute_pmm(table: RawTable, config: ImputeConfig) -> RawTable:
    """
    Fill MISSING cells by predictive mean matching hot-deck imputation.

    Columns are completed in increasing order of missingness (ties by column
    position). For each, a least-squares predictor on the currently complete
    covariates gives a predicted mean for every row; each missing cell copies
    the value of one donor drawn uniformly from the ``donor_pool_size`` observed
    rows with the nearest predicted mean. Completed columns join the covariate
    set for later columns.

    Args:
        table: Raw table, possibly with MISSING cells
        config: Donor pool size, seed, covariate policy and excluded columns

    Returns:
        Complete table; the input object itself when nothing is missing

    Raises:
        ImputationError: If a column is entirely missing or has fewer observed
            values than the donor pool needs
    """
    mask = table.missing_mask()
    if not mask.any():
        return table

    columns = table.columns
    excluded = set(config.exclude)
    n = table.shape[0]
    missing_counts = mask.sum(axis=0)
    k = config.donor_pool_size

    # Donor pools must be fillable before anything is imputed
    targets = [
        j for j, name in enumerate(columns) if missing_counts[j] and name not in excluded
    ]
    for j in targets:
        observed = n - int(missing_counts[j])
        if observed == 0:
            raise ImputationError(f"Column '{columns[j]}' is entirely missing")
        if observed < k:
            raise ImputationError(
                f"Column '{columns[j]}' has {observed} observed values; "
                f"donor_pool_size={k} cannot be satisfied"
            )

    if config.covariates is not None:
        unknown = set(config.covariates) - set(columns)
        if unknown:
            raise InvalidConfigError(f"Unknown covariate columns: {sorted(unknown)}")
    allowed = set(config.covariates) if config.covariates is not None else None

    # Least-missing columns first; each finished column becomes a covariate
    frame = table.frame.copy()
    complete = [
        name
        for j, name in enumerate(columns)
        if missing_counts[j] == 0 and name not in excluded
    ]
    for j in sorted(targets, key=lambda col: (int(missing_counts[col]), col)):
        name = columns[j]
        covariates = [c for c in complete if allowed is None or c in allowed]
        design = np.column_stack(
            [np.ones(n)] + [_coded(frame[c], table.kinds[c]) for c in covariates]
        )
        target = _coded(frame[name], table.kinds[name])
        missing_rows = np.flatnonzero(np.isnan(target))
        donor_rows = np.flatnonzero(~np.isnan(target))

        # Predicted means from the observed rows of this column
        coef, *_ = np.linalg.lstsq(design[donor_rows], target[donor_rows], rcond=None)
        predicted = design @ coef

        # Copy from one of the k donors nearest in predicted mean
        rng = np.random.default_rng([config.rng_seed, j])
        for row in missing_rows:
            distance = np.abs(predicted[donor_rows] - predicted[row])
            pool = donor_rows[np.argsort(distance, kind="stable")[:k]]
            donor = int(pool[rng.integers(pool.size)])
            frame.iat[row, j] = frame.iat[donor, j]

        logger.debug("impute.column", column=name, filled=int(missing_rows.size))
        complete.append(name)

    logger.info("impute.done", cells=int(mask.sum()), columns=len(targets))
    return RawTable(frame=frame, kinds=dict(table.kinds))


# ---------------------------------------------------------------------------
# One-hot encoding
# ---------------------------------------------------------------------------


def _first_missing(table: RawTable) -> tuple[str, int] | None:
    mask = table.missing_mask()
    if not mask.any():
        return None
    row, col = np.argwhere(mask)[0]
    return table.columns[int(col)], int(row)


def encode_labels(series: pd.Series, kind: ColumnKind, positive_label: str | None) -> IntArray:
    """Map a binary outcome column onto {0, 1}."""
    if kind is ColumnKind.NUMERIC and positive_label is None:
        values = series.to_numpy(dtype=np.float64)
        if not np.isin(values, (0.0, 1.0)).all():
            raise InvalidConfigError("Numeric label column must hold only 0 and 1")
        return values.astype(np.int64)

    text = series.map(lambda v: format(v, "g") if isinstance(v, float) else str(v))
    levels = sorted(text.unique())
    if len(levels) > 2:
        raise InvalidConfigError(f"Label column must be binary, found levels {levels}")
    positive = positive_label if positive_label is not None else levels[-1]
    return (text == positive).to_numpy().astype(np.int64)


def one_hot_encode(
    table: RawTable,
    *,
    label_column: str | None = None,
    weight_column: str | None = None,
    positive_label: str | None = None,
) -> FeatureMatrix:
    """
    Expand categorical columns into 0/1 indicator columns.

    Each categorical variable with c observed levels becomes c columns named
    ``<var>=<level>`` in first-appearance order; numeric columns pass through.
    The label and weight columns are lifted out of the feature set.

    Raises:
        MissingValueError: If the table still has a MISSING cell
    """
    first = _first_missing(table)
    if first is not None:
        raise MissingValueError(*first)
    for special in (label_column, weight_column):
        if special is not None and special not in table.kinds:
            raise InvalidConfigError(f"Column '{special}' not found in table")

    n = table.shape[0]
    blocks: list[FloatArray] = []
    meta: list[ColumnMeta] = []
    for name in table.columns:
        if name in (label_column, weight_column):
            continue
        series = table.frame[name]
        if table.kinds[name] is ColumnKind.NUMERIC:
            blocks.append(series.to_numpy(dtype=np.float64)[:, None])
            meta.append(ColumnMeta(name, NUMERIC_CATEGORY))
            continue
        codes, levels = pd.factorize(series, sort=False)
        indicators = np.zeros((n, len(levels)))
        indicators[np.arange(n), codes] = 1.0
        blocks.append(indicators)
        meta.extend(ColumnMeta(name, str(level)) for level in levels)

    labels = None
    if label_column is not None:
        labels = encode_labels(
            table.frame[label_column], table.kinds[label_column], positive_label
        )
    weights = None
    if weight_column is not None:
        if table.kinds[weight_column] is not ColumnKind.NUMERIC:
            raise InvalidConfigError(f"Weight column '{weight_column}' must be numeric")
        weights = table.frame[weight_column].to_numpy(dtype=np.float64)

    values = np.hstack(blocks) if blocks else np.zeros((n, 0))
    logger.info("encode.done", variables=len({m.source for m in meta}), columns=len(meta))
    return FeatureMatrix(values=values, column_meta=meta, labels=labels, weights=weights)


def decode_indicators(matrix: FeatureMatrix) -> RawTable:
    """Collapse every indicator group by argmax back to its level labels."""
    data: dict[str, object] = {}
    kinds: dict[str, ColumnKind] = {}
    groups: dict[str, list[int]] = {}
    for j, meta in enumerate(matrix.column_meta):
        groups.setdefault(meta.source, []).append(j)

    for source, cols in groups.items():
        if not matrix.column_meta[cols[0]].is_indicator:
            data[source] = pd.Series(matrix.values[:, cols[0]], dtype="float64")
            kinds[source] = ColumnKind.NUMERIC
            continue
        levels = np.array([matrix.column_meta[j].category for j in cols], dtype=object)
        picks = np.argmax(matrix.values[:, cols], axis=1)
        data[source] = pd.Series(levels[picks], dtype="object")
        kinds[source] = ColumnKind.CATEGORICAL
    return RawTable(frame=pd.DataFrame(data, columns=list(groups)), kinds=kinds)


def to_raw_table(matrix: FeatureMatrix, label_column: str = "label") -> RawTable:
    """Decoded table with the outcome appended as a 0/1 numeric column."""
    table = decode_indicators(matrix)
    frame = table.frame.copy()
    kinds = dict(table.kinds)
    if matrix.labels is not None:
        frame[label_column] = matrix.labels.astype(np.float64)
        kinds[label_column] = ColumnKind.NUMERIC
    return RawTable(frame=frame, kinds=kinds)


# ---------------------------------------------------------------------------
# Synthetic data
# ---------------------------------------------------------------------------


def planted_blocks(config: SynthConfig) -> IntArray:
    """Block number (1-based) of every generated variable; 0 for pure noise."""
    blocks = [np.full(size, b + 1) for b, size in enumerate(config.block_sizes)]
    blocks.append(np.zeros(config.n_noise))
    return np.concatenate(blocks).astype(np.int64)


def informative_columns(config: SynthConfig) -> list[int]:
    """Variables that drive the label: the first ``n_informative`` of each informative block."""
    starts = np.concatenate([[0], np.cumsum(config.block_sizes)[:-1]])
    return [
        int(starts[b]) + i
        for b in range(config.informative_block_count)
        for i in range(config.n_informative)
    ]


def variable_names(config: SynthConfig) -> list[str]:
    names = [
        f"b{b + 1}_x{i + 1}"
        for b, size in enumerate(config.block_sizes)
        for i in range(size)
    ]
    return names + [f"noise_{i + 1}" for i in range(config.n_noise)]


def generate_synthetic(config: SynthConfig) -> FeatureMatrix:
    """
    Draw a labeled dataset with planted block correlation.

    Every block shares one latent factor: x = sqrt(rho)·z + sqrt(1 - rho)·e, so
    within-block Pearson correlation is rho and cross-block correlation is 0.
    The label thresholds signal·(scaled sum of informative variables) plus unit
    Gaussian noise at 0 (an infinite signal uses the sum alone), then flips each
    label with probability ``noise_rate``.
    """
    rng = np.random.default_rng(config.rng_seed)
    n = config.n_samples
    parts = []
    for size in config.block_sizes:
        factor = rng.standard_normal(n)
        noise = rng.standard_normal((n, size))
        parts.append(math.sqrt(config.rho) * factor[:, None] + math.sqrt(1 - config.rho) * noise)
    parts.append(rng.standard_normal((n, config.n_noise)))
    latent = np.hstack(parts)

    informative = informative_columns(config)
    if informative:
        signal = latent[:, informative].sum(axis=1) / math.sqrt(len(informative))
    else:
        signal = np.zeros(n)
    jitter = rng.standard_normal(n)
    if math.isinf(config.signal_strength):
        score = signal
    else:
        score = config.signal_strength * signal + jitter
    labels = (score > 0).astype(np.int64)
    flips = rng.random(n) < config.noise_rate
    labels = np.where(flips, 1 - labels, labels)

    names = variable_names(config)
    if config.output == "continuous":
        values = latent
        meta = [ColumnMeta(name, NUMERIC_CATEGORY) for name in names]
    elif config.output == "indicator":
        values = (latent > 0).astype(np.float64)
        meta = [ColumnMeta(name, NUMERIC_CATEGORY) for name in names]
    else:
        levels = config.n_levels
        cut_points = np.linspace(0.0, 1.0, levels + 1)[1:-1]
        blocks = []
        meta = []
        for j, name in enumerate(names):
            edges = np.quantile(latent[:, j], cut_points)
            codes = np.searchsorted(edges, latent[:, j], side="right")
            block = np.zeros((n, levels))
            block[np.arange(n), codes] = 1.0
            blocks.append(block)
            meta.extend(ColumnMeta(name, f"L{level + 1}") for level in range(levels))
        values = np.hstack(blocks)

    logger.info(
        "synth.done",
        rows=n,
        variables=len(names),
        informative=len(informative),
        positive_rate=float(labels.mean()),
    )
    return FeatureMatrix(values=values, column_meta=meta, labels=labels)
