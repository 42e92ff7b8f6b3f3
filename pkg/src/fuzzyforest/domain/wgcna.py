"""Weighted correlation network module formation.

Pearson similarity -> unsigned soft-threshold adjacency -> topological overlap ->
average-linkage clustering of 1 - TOM -> static height cut with a minimum
module size; everything left unclustered lands in the grey module.
"""

from __future__ import annotations

from collections.abc import Sequence

import numpy as np
import structlog
from scipy.cluster.hierarchy import fcluster
from scipy.special import comb
from scipy.stats import linregress

from fuzzyforest.domain.errors import InvalidConfigError, InvalidDissimilarityError
from fuzzyforest.domain.models import (
    GREY_COLOR,
    GREY_MODULE,
    Dendrogram,
    FeatureMatrix,
    FloatArray,
    IntArray,
    ModuleFormation,
    ModulePartition,
    ScaleFreeFit,
    WgcnaConfig,
)

logger = structlog.get_logger(__name__)

# WGCNA standard color order, so module names line up with its reports.
STANDARD_COLORS: tuple[str, ...] = (
    "turquoise", "blue", "brown", "yellow", "green", "red", "black", "pink",
    "magenta", "purple", "greenyellow", "tan", "salmon", "cyan", "midnightblue",
    "lightcyan", "grey60", "lightgreen", "lightyellow", "royalblue", "darkred",
    "darkgreen", "darkturquoise", "darkgrey", "orange", "darkorange", "white",
    "skyblue", "saddlebrown", "steelblue", "paleturquoise", "violet",
    "darkolivegreen", "darkmagenta",
)  # fmt: skip


def module_color(module_id: int) -> str:
    if module_id == GREY_MODULE:
        return GREY_COLOR
    if module_id <= len(STANDARD_COLORS):
        return STANDARD_COLORS[module_id - 1]
    return f"module{module_id}"


def correlation_matrix(data: FeatureMatrix | FloatArray) -> FloatArray:
    """
    Pearson correlation between columns.

    Constant columns have no defined correlation; they get 0 against every
    other column (and 1 on the diagonal), which sends them to grey.
    """
    X = data.values if isinstance(data, FeatureMatrix) else np.asarray(data, dtype=np.float64)
    if X.shape[0] < 2:
        raise InvalidConfigError("correlation needs at least two rows")
    constant = np.ptp(X, axis=0) == 0
    centered = X - X.mean(axis=0)
    norms = np.sqrt(np.sum(centered**2, axis=0))
    norms[constant] = 1.0
    sim = (centered.T @ centered) / np.outer(norms, norms)
    sim = (sim + sim.T) / 2.0
    sim[constant, :] = 0.0
    sim[:, constant] = 0.0
    np.clip(sim, -1.0, 1.0, out=sim)
    np.fill_diagonal(sim, 1.0)
    return sim


def adjacency(sim: FloatArray, beta: float) -> FloatArray:
    """Unsigned soft-threshold adjacency |s_ij|^beta with a unit diagonal."""
    if beta < 1:
        raise InvalidConfigError(f"soft-threshold power must be >= 1, got {beta}")
    adj = np.abs(np.asarray(sim, dtype=np.float64)) ** beta
    np.fill_diagonal(adj, 1.0)
    return adj


def scale_free_fit(adj: FloatArray, beta: int, n_bins: int = 10) -> ScaleFreeFit:
    """
    Signed scale-free topology fit index of a network.

    Connectivities (excluding self) are binned; log10 of bin frequency is
    regressed on log10 of mean bin connectivity and the index is
    -sign(slope)·R². A network whose nodes all share one degree fits trivially.
    """
    connectivity = adj.sum(axis=1) - np.diag(adj)
    mean_k = float(connectivity.mean())
    positive = connectivity[connectivity > 0]
    if positive.size == 0 or np.ptp(positive) <= 1e-12 * max(1.0, float(positive.max())):
        return ScaleFreeFit(beta=beta, r2=1.0, slope=0.0, mean_connectivity=mean_k)

    counts, edges = np.histogram(positive, bins=n_bins)
    which = np.clip(np.searchsorted(edges, positive, side="right") - 1, 0, n_bins - 1)
    sums = np.bincount(which, weights=positive, minlength=n_bins)
    midpoints = (edges[:-1] + edges[1:]) / 2.0
    mean_per_bin = np.where(counts > 0, sums / np.maximum(counts, 1), midpoints)
    log_k = np.log10(mean_per_bin)
    log_p = np.log10(counts / positive.size + 1e-9)
    fit = linregress(log_k, log_p)
    r2 = float(fit.rvalue**2)
    slope = float(fit.slope)
    return ScaleFreeFit(
        beta=beta, r2=-float(np.sign(slope)) * r2, slope=slope, mean_connectivity=mean_k
    )


def soft_threshold_table(sim: FloatArray, candidates: Sequence[int]) -> list[ScaleFreeFit]:
    """Scale-free fit for every candidate power, in ascending power order."""
    return [scale_free_fit(adjacency(sim, beta), beta) for beta in sorted(set(candidates))]


def _choose_beta(
    table: list[ScaleFreeFit], r2_cut: float, fallback_beta: int
) -> tuple[int, str | None]:
    for fit in table:
        if fit.r2 >= r2_cut:
            return fit.beta, None
    message = (
        f"No soft-threshold power reached scale-free fit {r2_cut}; "
        f"falling back to beta={fallback_beta}"
    )
    return fallback_beta, message


def pick_beta(
    sim: FloatArray,
    candidates: Sequence[int] = tuple(range(1, 13)),
    r2_cut: float = 0.8,
    fallback_beta: int = 6,
) -> int:
    """Smallest candidate power whose network fits scale-free topology with R² >= r2_cut."""
    if not candidates:
        raise InvalidConfigError("pick_beta needs at least one candidate power")
    beta, warning = _choose_beta(soft_threshold_table(sim, candidates), r2_cut, fallback_beta)
    if warning:
        logger.warning("wgcna.beta.fallback", beta=beta, r2_cut=r2_cut)
    return beta


def topological_overlap(adj: FloatArray) -> FloatArray:
    """
    Unsigned topological overlap matrix.

    TOM_ij = (L_ij + a_ij) / (min(k_i, k_j) + 1 - a_ij) with
    L_ij = sum_{u != i, j} a_iu·a_uj and k_i = sum_{u != i} a_iu; TOM_ii = 1.
    """
    A = np.array(adj, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise InvalidConfigError("adjacency must be a square matrix")
    if (A < 0).any() or (A > 1).any():
        raise InvalidConfigError("adjacency entries must lie in [0, 1]")
    np.fill_diagonal(A, 0.0)
    shared = A @ A
    connectivity = A.sum(axis=1)
    denominator = np.minimum.outer(connectivity, connectivity) + 1.0 - A
    # a_ij = 1 forces k_i, k_j >= 1, so the denominator stays positive
    if (denominator <= 0).any():
        raise InvalidConfigError("topological overlap denominator is not positive")
    tom = (shared + A) / denominator
    np.fill_diagonal(tom, 1.0)
    return tom


def tom_dissimilarity(tom: FloatArray) -> FloatArray:
    dissim = np.clip(1.0 - tom, 0.0, None)
    np.fill_diagonal(dissim, 0.0)
    return dissim


def linkage_average(dissim: FloatArray, labels: Sequence[str] | None = None) -> Dendrogram:
    """
    Agglomerative average-linkage (UPGMA) clustering.

    Leaves are clusters 0..p-1 and the merge at step s creates cluster p+s.
    Among equally close pairs the one with the smallest cluster index wins.

    Raises:
        InvalidDissimilarityError: On asymmetry beyond 1e-9, negative or
            non-finite entries, or a nonzero diagonal
    """
    D = np.asarray(dissim, dtype=np.float64)
    if D.ndim != 2 or D.shape[0] != D.shape[1]:
        raise InvalidDissimilarityError("dissimilarity must be a square matrix")
    if not np.isfinite(D).all():
        raise InvalidDissimilarityError("dissimilarity has non-finite entries")
    if np.abs(D - D.T).max(initial=0.0) > 1e-9:
        raise InvalidDissimilarityError("dissimilarity is not symmetric")
    if (D < 0).any():
        raise InvalidDissimilarityError("dissimilarity has negative entries")
    if np.abs(np.diag(D)).max(initial=0.0) > 1e-9:
        raise InvalidDissimilarityError("dissimilarity diagonal must be zero")

    p = D.shape[0]
    names = list(labels) if labels is not None else [str(i) for i in range(p)]
    work = (D + D.T) / 2.0
    np.fill_diagonal(work, np.inf)
    ids = np.arange(p)
    sizes = np.ones(p)
    merges = np.zeros((max(p - 1, 0), 4))

    for step in range(p - 1):
        # Closest pair, ties to the smallest cluster ids
        height = work.min()
        rows, cols = np.nonzero(np.triu(work == height, 1))
        low = np.minimum(ids[rows], ids[cols])
        high = np.maximum(ids[rows], ids[cols])
        pick = int(np.lexsort((high, low))[0])
        a, b = int(rows[pick]), int(cols[pick])
        merges[step] = (low[pick], high[pick], height, sizes[a] + sizes[b])

        # Row a becomes the size-weighted mean of a and b; b is retired
        merged = (sizes[a] * work[a] + sizes[b] * work[b]) / (sizes[a] + sizes[b])
        work[a, :] = merged
        work[:, a] = merged
        work[b, :] = np.inf
        work[:, b] = np.inf
        work[a, a] = np.inf
        sizes[a] += sizes[b]
        ids[a] = p + step

    # Heights are monotone for UPGMA up to rounding
    if p > 1:
        merges[:, 2] = np.maximum.accumulate(merges[:, 2])
    return Dendrogram(linkage=merges, labels=names)


def cut_modules(
    dend: Dendrogram,
    cut_height: float | None = None,
    min_module_size: int = 5,
    cut_fraction: float = 0.99,
) -> ModulePartition:
    """
    Static height cut of a dendrogram into modules.

    Subtrees whose root merge height is <= ``cut_height`` (default
    ``cut_fraction`` of the tallest merge) form clusters; clusters smaller than
    ``min_module_size`` go to grey. Modules are numbered 1..m by decreasing
    size (ties by smallest member) and colored in WGCNA palette order.
    """
    if min_module_size < 1:
        raise InvalidConfigError("min_module_size must be >= 1")
    p = dend.n_leaves
    heights = dend.heights
    if cut_height is None:
        cut_height = cut_fraction * float(heights.max()) if heights.size else 0.0
    if cut_height < 0:
        raise InvalidConfigError("cut_height must be >= 0")

    if p == 1:
        clusters = np.ones(1, dtype=np.int64)
    else:
        clusters = fcluster(dend.linkage, t=cut_height, criterion="distance").astype(np.int64)

    groups = [np.flatnonzero(clusters == c) for c in np.unique(clusters)]
    kept = sorted(
        (g for g in groups if g.size >= min_module_size),
        key=lambda g: (-g.size, int(g[0])),
    )
    module_ids = np.full(p, GREY_MODULE, dtype=np.int64)
    for number, members in enumerate(kept, start=1):
        module_ids[members] = number
    colors = {m: module_color(m) for m in range(len(kept) + 1)}
    logger.info(
        "wgcna.cut",
        height=cut_height,
        modules=len(kept),
        grey=int((module_ids == GREY_MODULE).sum()),
    )
    return ModulePartition(
        module_ids=module_ids,
        feature_names=list(dend.labels),
        colors=colors,
        cut_height=float(cut_height),
        min_module_size=min_module_size,
    )


def form_modules(data: FeatureMatrix, config: WgcnaConfig) -> ModuleFormation:
    """Run correlation -> power -> TOM -> clustering -> cut on ``data``'s columns."""
    sim = correlation_matrix(data)
    table = soft_threshold_table(sim, config.beta_candidates)
    warnings: list[str] = []
    if config.beta is None:
        beta, warning = _choose_beta(table, config.r2_cut, config.fallback_beta)
        if warning:
            logger.warning("wgcna.beta.fallback", beta=beta, r2_cut=config.r2_cut)
            warnings.append(warning)
    else:
        beta = config.beta
    adj = adjacency(sim, beta)
    tom = topological_overlap(adj)
    dend = linkage_average(tom_dissimilarity(tom), labels=data.columns)
    partition = cut_modules(dend, config.cut_height, config.min_module_size, config.cut_fraction)
    logger.info("wgcna.modules", beta=beta, modules=len(partition.module_numbers))
    return ModuleFormation(
        partition=partition,
        beta=beta,
        fit_table=table,
        similarity=sim,
        adjacency=adj,
        tom=tom,
        dendrogram=dend,
        warnings=warnings,
    )


def adjusted_rand_index(first: Sequence[int] | IntArray, second: Sequence[int] | IntArray) -> float:
    """Chance-corrected agreement between two labelings of the same items."""
    a = np.asarray(first)
    b = np.asarray(second)
    if a.shape != b.shape:
        raise InvalidConfigError("labelings must have the same length")
    _, a_codes = np.unique(a, return_inverse=True)
    _, b_codes = np.unique(b, return_inverse=True)
    table = np.zeros((a_codes.max() + 1, b_codes.max() + 1))
    np.add.at(table, (a_codes, b_codes), 1.0)
    pairs = float(comb(table, 2).sum())
    row_pairs = float(comb(table.sum(axis=1), 2).sum())
    col_pairs = float(comb(table.sum(axis=0), 2).sum())
    total = float(comb(a.size, 2))
    expected = row_pairs * col_pairs / total if total else 0.0
    ceiling = (row_pairs + col_pairs) / 2.0
    if ceiling == expected:
        return 1.0
    return (pairs - expected) / (ceiling - expected)


def module_summary(partition: ModulePartition) -> list[dict[str, object]]:
    """Size and member names of every module, grey last."""
    order = [*partition.module_numbers, GREY_MODULE]
    summary = []
    for module_id in order:
        members = partition.members(module_id)
        if members.size == 0:
            continue
        summary.append(
            {
                "module_id": module_id,
                "color": partition.colors.get(module_id, module_color(module_id)),
                "size": int(members.size),
                "features": [partition.feature_names[i] for i in members],
            }
        )
    return summary
