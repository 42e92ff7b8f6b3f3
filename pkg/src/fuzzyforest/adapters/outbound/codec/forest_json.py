"""JSON codec for fitted forests."""

from collections.abc import Mapping
from typing import Any

import numpy as np
from pydantic import ValidationError

from fuzzyforest.adapters.outbound.codec.schemas import ForestDocument, TreeParamsSchema, TreeSchema
from fuzzyforest.domain.errors import InvalidConfigError
from fuzzyforest.domain.models import Forest, Tree, TreeParams
from fuzzyforest.domain.ports import ForestCodecPort


def _tree_document(tree: Tree) -> TreeSchema:
    return TreeSchema(
        feature=tree.feature.tolist(),
        threshold=tree.threshold.tolist(),
        left=tree.left.tolist(),
        right=tree.right.tolist(),
        value=[(float(a), float(b)) for a, b in tree.value],
        in_bag=tree.in_bag.tolist(),
        oob=tree.oob.tolist(),
    )


def _tree(document: TreeSchema) -> Tree:
    n_nodes = len(document.feature)
    if not (
        len(document.threshold) == len(document.left) == len(document.right)
        == len(document.value) == n_nodes
    ):
        raise InvalidConfigError("Tree node arrays have different lengths")
    return Tree(
        feature=np.asarray(document.feature, dtype=np.int64),
        threshold=np.asarray(document.threshold, dtype=np.float64),
        left=np.asarray(document.left, dtype=np.int64),
        right=np.asarray(document.right, dtype=np.int64),
        value=np.asarray(document.value, dtype=np.float64).reshape(n_nodes, 2),
        in_bag=np.asarray(document.in_bag, dtype=np.int64),
        oob=np.asarray(document.oob, dtype=np.int64),
    )


class ForestJsonCodec(ForestCodecPort):
    """Forest <-> versioned JSON document."""

    def encode(self, forest: Forest) -> dict[str, Any]:
        document = ForestDocument(
            seed=forest.seed,
            n_columns=forest.n_columns,
            features=forest.features.tolist(),
            feature_names=list(forest.feature_names),
            params=TreeParamsSchema(
                mtry=forest.params.mtry,
                max_depth=forest.params.max_depth,
                min_leaf=forest.params.min_leaf,
                min_split=forest.params.min_split,
            ),
            trees=[_tree_document(t) for t in forest.trees],
        )
        return document.model_dump(mode="json")

    def decode(self, document: Mapping[str, Any]) -> Forest:
        """
        Rebuild a Forest.

        Raises:
            InvalidConfigError: If the document is malformed or has another format_version
        """
        try:
            parsed = ForestDocument.model_validate(dict(document))
        except ValidationError as e:
            raise InvalidConfigError(f"Invalid forest document: {e}") from e
        if len(parsed.features) != len(parsed.feature_names):
            raise InvalidConfigError("Forest features and feature_names differ in length")
        return Forest(
            trees=[_tree(t) for t in parsed.trees],
            features=np.asarray(parsed.features, dtype=np.int64),
            feature_names=list(parsed.feature_names),
            n_columns=parsed.n_columns,
            params=TreeParams(**parsed.params.model_dump()),
            seed=parsed.seed,
        )
