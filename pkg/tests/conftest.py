"""Pytest fixtures."""

import numpy as np
import pytest
from fuzzyforest.domain.data_pipeline import build_table, generate_synthetic
from fuzzyforest.domain.models import FeatureMatrix, RawTable, SynthConfig

from tests.factories import make_matrix


@pytest.fixture()
def survey_table() -> RawTable:
    """Small mixed table with two missing cells."""
    header = ["age", "party", "region", "vote"]
    rows = [
        ["34", "dem", "north", "biden"],
        ["51", "rep", "south", "trump"],
        ["", "dem", "north", "biden"],
        ["45", "ind", "west", "trump"],
        ["29", "dem", "", "biden"],
        ["62", "rep", "south", "trump"],
        ["38", "ind", "north", "biden"],
        ["57", "rep", "west", "trump"],
        ["41", "dem", "south", "biden"],
        ["70", "rep", "south", "trump"],
    ]
    return build_table(header, rows)


@pytest.fixture()
def separable_data() -> FeatureMatrix:
    """Column x0 separates the classes at 0; x1 and x2 are noise."""
    rng = np.random.default_rng(11)
    n = 120
    x0 = rng.normal(size=n)
    labels = (x0 > 0).astype(np.int64)
    values = np.column_stack([x0, rng.normal(size=n), rng.normal(size=n)])
    return make_matrix(values, labels)


@pytest.fixture()
def block_config() -> SynthConfig:
    """Three planted blocks of ten, one informative variable per block."""
    return SynthConfig(
        n_samples=400,
        block_sizes=(10, 10, 10),
        rho=0.7,
        n_informative=1,
        signal_strength=3.0,
        rng_seed=3,
    )


@pytest.fixture()
def block_data(block_config: SynthConfig) -> FeatureMatrix:
    return generate_synthetic(block_config)
