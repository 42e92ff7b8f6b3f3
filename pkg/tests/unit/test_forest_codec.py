"""Unit tests for the forest JSON codec."""

import numpy as np
import pytest
from fuzzyforest.adapters.outbound.codec.forest_json import ForestJsonCodec
from fuzzyforest.domain.errors import InvalidConfigError
from fuzzyforest.domain.models import FeatureMatrix, TreeParams
from fuzzyforest.domain.random_forest import fit_forest, predict_proba


class TestForestJsonCodec:
    """Test suite for ForestJsonCodec."""

    def test_decoded_forest_predicts_identically(self, separable_data: FeatureMatrix) -> None:
        forest = fit_forest(separable_data, [0, 2], 6, TreeParams(max_depth=3), seed=4)
        codec = ForestJsonCodec()

        restored = codec.decode(codec.encode(forest))

        assert restored.feature_names == ["x0", "x2"]
        assert restored.params == forest.params
        assert np.array_equal(
            predict_proba(restored, separable_data.values),
            predict_proba(forest, separable_data.values),
        )

    def test_rejects_other_format_version(self, separable_data: FeatureMatrix) -> None:
        codec = ForestJsonCodec()
        document = codec.encode(fit_forest(separable_data, [0], 2, TreeParams(), seed=1))
        document["format_version"] = 2
        with pytest.raises(InvalidConfigError, match="Invalid forest document"):
            codec.decode(document)

    def test_rejects_ragged_tree(self, separable_data: FeatureMatrix) -> None:
        codec = ForestJsonCodec()
        document = codec.encode(fit_forest(separable_data, [0], 2, TreeParams(), seed=1))
        document["trees"][0]["threshold"].append(0.0)
        with pytest.raises(InvalidConfigError, match="different lengths"):
            codec.decode(document)
