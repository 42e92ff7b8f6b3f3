"""Unit tests for WGCNA module formation."""

import numpy as np
import pytest
from fuzzyforest.domain.data_pipeline import generate_synthetic, planted_blocks
from fuzzyforest.domain.errors import InvalidConfigError, InvalidDissimilarityError
from fuzzyforest.domain.models import GREY_MODULE, Dendrogram, SynthConfig, WgcnaConfig
from fuzzyforest.domain.wgcna import (
    STANDARD_COLORS,
    adjacency,
    adjusted_rand_index,
    correlation_matrix,
    cut_modules,
    form_modules,
    linkage_average,
    module_color,
    module_summary,
    pick_beta,
    soft_threshold_table,
    tom_dissimilarity,
    topological_overlap,
)
from scipy.cluster.hierarchy import cophenet, linkage
from scipy.spatial.distance import squareform

from tests.factories import make_matrix


def _tom_by_loops(adj: np.ndarray) -> np.ndarray:
    p = adj.shape[0]
    tom = np.eye(p)
    for i in range(p):
        for j in range(p):
            if i == j:
                continue
            shared = sum(adj[i, u] * adj[u, j] for u in range(p) if u not in (i, j))
            k_i = sum(adj[i, u] for u in range(p) if u != i)
            k_j = sum(adj[j, u] for u in range(p) if u != j)
            tom[i, j] = (shared + adj[i, j]) / (min(k_i, k_j) + 1 - adj[i, j])
    return tom


def _random_adjacency(rng: np.random.Generator, p: int) -> np.ndarray:
    upper = np.triu(rng.uniform(size=(p, p)), 1)
    adj = upper + upper.T
    np.fill_diagonal(adj, 1.0)
    return adj


def _block_dissimilarity(sizes: list[int], within: float, between: float) -> np.ndarray:
    blocks = np.repeat(np.arange(len(sizes)), sizes)
    dissim = np.where(blocks[:, None] == blocks[None, :], within, between)
    np.fill_diagonal(dissim, 0.0)
    return dissim


class TestSimilarity:
    """Test suite for correlation and adjacency."""

    def test_correlation_self_and_negation(self) -> None:
        x = np.random.default_rng(0).normal(size=50)
        sim = correlation_matrix(np.column_stack([x, -x]))
        assert sim[0, 0] == 1.0
        assert sim[0, 1] == pytest.approx(-1.0)

    def test_correlation_independent_columns(self) -> None:
        values = np.random.default_rng(1).normal(size=(10000, 2))
        assert abs(correlation_matrix(values)[0, 1]) < 0.05

    def test_correlation_constant_column_is_uncorrelated(self) -> None:
        rng = np.random.default_rng(2)
        values = np.column_stack([rng.normal(size=20), np.full(20, 4.0)])
        sim = correlation_matrix(make_matrix(values))
        assert sim[0, 1] == 0.0
        assert sim[1, 1] == 1.0

    def test_adjacency_values(self) -> None:
        sim = np.array([[1.0, 0.0, -0.5], [0.0, 1.0, 1.0], [-0.5, 1.0, 1.0]])
        adj = adjacency(sim, 2)
        assert adj[0, 1] == 0.0
        assert adj[0, 2] == 0.25
        assert adj[1, 2] == 1.0

    def test_adjacency_weakly_decreasing_in_power(self) -> None:
        sim = correlation_matrix(np.random.default_rng(3).normal(size=(30, 8)))
        previous = adjacency(sim, 1)
        for beta in range(2, 13):
            current = adjacency(sim, beta)
            assert np.all(current <= previous + 1e-15)
            previous = current

    def test_adjacency_rejects_power_below_one(self) -> None:
        with pytest.raises(InvalidConfigError):
            adjacency(np.eye(2), 0)


class TestPickBeta:
    """Test suite for soft-threshold power selection."""

    def test_identical_columns_pick_smallest_candidate(self) -> None:
        x = np.random.default_rng(4).normal(size=40)
        sim = correlation_matrix(np.column_stack([x] * 6))
        assert pick_beta(sim, candidates=[3, 5, 7]) == 3

    def test_block_data_power_is_reproducible(self, block_data) -> None:
        sim = correlation_matrix(block_data)
        first = pick_beta(sim)
        assert first >= 1
        assert pick_beta(correlation_matrix(block_data)) == first

    def test_fit_table_in_power_order(self, block_data) -> None:
        table = soft_threshold_table(correlation_matrix(block_data), [4, 2, 8])
        assert [fit.beta for fit in table] == [2, 4, 8]
        assert all(-1.0 <= fit.r2 <= 1.0 for fit in table)


class TestTopologicalOverlap:
    """Test suite for topological_overlap."""

    def test_tom_matches_triple_loop(self) -> None:
        rng = np.random.default_rng(5)
        for _ in range(200):
            adj = _random_adjacency(rng, int(rng.integers(2, 17)))
            assert np.allclose(topological_overlap(adj), _tom_by_loops(adj), atol=1e-12, rtol=0)

    def test_tom_symmetric_bounded_unit_diagonal(self) -> None:
        adj = _random_adjacency(np.random.default_rng(6), 12)
        tom = topological_overlap(adj)
        assert np.allclose(tom, tom.T)
        assert tom.min() >= 0.0
        assert tom.max() <= 1.0 + 1e-12
        assert np.all(np.diag(tom) == 1.0)

    def test_tom_complete_graph(self) -> None:
        assert np.allclose(topological_overlap(np.ones((4, 4))), 1.0)

    def test_tom_isolated_nodes(self) -> None:
        tom = topological_overlap(np.eye(2))
        assert tom[0, 1] == 0.0

    def test_tom_three_node_path(self) -> None:
        adj = np.array([[1.0, 1.0, 1.0], [1.0, 1.0, 0.0], [1.0, 0.0, 1.0]])
        tom = topological_overlap(adj)
        assert tom[1, 2] == 0.5
        assert tom[0, 1] == 1.0

    def test_tom_rejects_out_of_range_adjacency(self) -> None:
        with pytest.raises(InvalidConfigError):
            topological_overlap(np.array([[1.0, 1.5], [1.5, 1.0]]))


class TestLinkage:
    """Test suite for average-linkage clustering."""

    def test_two_leaves(self) -> None:
        dend = linkage_average(np.array([[0.0, 0.3], [0.3, 0.0]]))
        assert dend.linkage.tolist() == [[0.0, 1.0, 0.3, 2.0]]

    def test_three_leaves_by_hand(self) -> None:
        dissim = np.array([[0.0, 0.1, 0.8], [0.1, 0.0, 0.8], [0.8, 0.8, 0.0]])
        dend = linkage_average(dissim, ["a", "b", "c"])
        assert dend.linkage[0].tolist() == [0.0, 1.0, 0.1, 2.0]
        assert dend.linkage[1].tolist() == [2.0, 3.0, 0.8, 3.0]
        assert dend.labels == ["a", "b", "c"]

    def test_matches_scipy_average_linkage(self) -> None:
        rng = np.random.default_rng(7)
        points = rng.normal(size=(15, 3))
        dissim = np.sqrt(((points[:, None, :] - points[None, :, :]) ** 2).sum(axis=2))

        ours = linkage_average(dissim)
        reference = linkage(squareform(dissim, checks=False), method="average")

        assert np.allclose(np.sort(ours.heights), np.sort(reference[:, 2]))
        assert np.allclose(cophenet(ours.linkage), cophenet(reference))

    def test_ties_merge_smallest_indices_first(self) -> None:
        dissim = np.ones((4, 4)) - np.eye(4)
        dend = linkage_average(dissim)
        assert dend.linkage[0, :2].tolist() == [0.0, 1.0]

    def test_rejects_asymmetric_matrix(self) -> None:
        with pytest.raises(InvalidDissimilarityError):
            linkage_average(np.array([[0.0, 0.2], [0.3, 0.0]]))

    def test_rejects_negative_entries(self) -> None:
        with pytest.raises(InvalidDissimilarityError):
            linkage_average(np.array([[0.0, -0.2], [-0.2, 0.0]]))


class TestCutModules:
    """Test suite for the static height cut."""

    def test_cut_recovers_blocks(self) -> None:
        dissim = _block_dissimilarity([6, 5, 4], 0.1, 0.9)
        partition = cut_modules(linkage_average(dissim), cut_height=0.5, min_module_size=1)
        assert partition.module_ids.tolist() == [1] * 6 + [2] * 5 + [3] * 4
        assert [partition.colors[m] for m in (0, 1, 2, 3)] == ["grey", "turquoise", "blue", "brown"]

    def test_cut_above_everything_is_one_module(self) -> None:
        dissim = _block_dissimilarity([3, 3], 0.1, 0.9)
        partition = cut_modules(linkage_average(dissim), cut_height=1.0, min_module_size=1)
        assert set(partition.module_ids.tolist()) == {1}
        assert partition.members(GREY_MODULE).size == 0

    def test_uncorrelated_features_all_grey(self) -> None:
        dissim = np.ones((12, 12)) - np.eye(12)
        partition = cut_modules(linkage_average(dissim), min_module_size=5)
        assert np.all(partition.module_ids == GREY_MODULE)
        assert partition.module_numbers == []

    def test_small_clusters_go_grey(self) -> None:
        dissim = _block_dissimilarity([6, 2], 0.1, 0.9)
        partition = cut_modules(linkage_average(dissim), cut_height=0.5, min_module_size=5)
        assert partition.module_ids.tolist() == [1] * 6 + [0] * 2
        assert min(size for m, size in partition.sizes().items() if m != GREY_MODULE) >= 5

    def test_single_feature(self) -> None:
        dend = Dendrogram(linkage=np.zeros((0, 4)), labels=["only"])
        partition = cut_modules(dend, min_module_size=1)
        assert partition.module_ids.tolist() == [1]

    def test_palette_extends_past_named_colors(self) -> None:
        assert module_color(1) == "turquoise"
        assert module_color(len(STANDARD_COLORS) + 1) == f"module{len(STANDARD_COLORS) + 1}"


class TestFormModules:
    """Test suite for the full module formation."""

    def test_planted_blocks_recovered(self) -> None:
        config = SynthConfig(n_samples=500, block_sizes=(20, 20, 20), rho=0.7, rng_seed=12)
        data = generate_synthetic(config)

        formation = form_modules(data, WgcnaConfig(beta=6))

        truth = planted_blocks(config)
        assert adjusted_rand_index(formation.partition.module_ids, truth) >= 0.8

    def test_within_module_correlation_exceeds_between(self, block_data) -> None:
        formation = form_modules(block_data, WgcnaConfig(beta=6))
        partition = formation.partition
        strength = np.abs(formation.similarity)
        for module_id in partition.module_numbers:
            inside = partition.module_ids == module_id
            within = strength[np.ix_(inside, inside)][~np.eye(inside.sum(), dtype=bool)]
            between = strength[np.ix_(inside, ~inside)]
            assert within.mean() > between.mean()

    def test_complement_indicators_share_a_module(self) -> None:
        z = np.random.default_rng(8).normal(size=(200, 3))
        values = np.column_stack([z[:, 0], -z[:, 0], z[:, 1], -z[:, 1], z[:, 2], -z[:, 2]])
        data = make_matrix(values, np.zeros(200, dtype=np.int64))

        partition = form_modules(data, WgcnaConfig(beta=6, min_module_size=2)).partition

        for j in range(0, 6, 2):
            assert partition.module_ids[j] != GREY_MODULE
            assert partition.module_ids[j] == partition.module_ids[j + 1]

    def test_partition_is_total(self, block_data) -> None:
        formation = form_modules(block_data, WgcnaConfig())
        sizes = formation.partition.sizes()
        assert sum(sizes.values()) == block_data.n_features
        assert formation.partition.feature_names == block_data.columns

    def test_dissimilarity_from_tom(self) -> None:
        tom = np.array([[1.0, 0.25], [0.25, 1.0]])
        assert tom_dissimilarity(tom).tolist() == [[0.0, 0.75], [0.75, 0.0]]

    def test_module_summary_lists_grey_last(self) -> None:
        dissim = _block_dissimilarity([6, 2], 0.1, 0.9)
        partition = cut_modules(linkage_average(dissim), cut_height=0.5, min_module_size=5)
        summary = module_summary(partition)
        assert [entry["color"] for entry in summary] == ["turquoise", "grey"]
        assert summary[1]["size"] == 2


class TestAdjustedRandIndex:
    """Test suite for adjusted_rand_index."""

    def test_identical_up_to_relabeling(self) -> None:
        assert adjusted_rand_index([1, 1, 2, 2, 3], [7, 7, 4, 4, 0]) == pytest.approx(1.0)

    def test_known_value(self) -> None:
        assert adjusted_rand_index([0, 0, 1, 1], [0, 0, 1, 2]) == pytest.approx(0.5714285714)

    def test_length_mismatch(self) -> None:
        with pytest.raises(InvalidConfigError):
            adjusted_rand_index([0, 1], [0])
