"""Port interfaces (hexagonal architecture)."""

from abc import ABC, abstractmethod
from collections.abc import Mapping, Sequence
from pathlib import Path
from typing import Any

import pandas as pd

from fuzzyforest.domain.models import (
    ColumnKind,
    Dendrogram,
    Forest,
    ModulePartition,
    RawTable,
    RocCurve,
)


class TableSourcePort(ABC):
    """Port for reading raw survey tables."""

    @abstractmethod
    def read(
        self,
        path: Path,
        schema: Mapping[str, ColumnKind] | None = None,
        sentinels: Sequence[str] = ("", "NA"),
    ) -> RawTable:
        """Parse a delimited text file into a RawTable."""
        ...


class ArtifactStorePort(ABC):
    """Port for writing run artifacts, each stamped with a provenance header."""

    @abstractmethod
    def write_table(self, name: str, frame: pd.DataFrame, header: Mapping[str, Any]) -> Path:
        """Write a CSV table."""
        ...

    @abstractmethod
    def write_json(self, name: str, document: Mapping[str, Any], header: Mapping[str, Any]) -> Path:
        """Write a JSON document."""
        ...

    @abstractmethod
    def write_svg(self, name: str, svg: str, header: Mapping[str, Any]) -> Path:
        """Write an SVG image."""
        ...

    @abstractmethod
    def read_json(self, path: Path) -> dict[str, Any]:
        """Read back a JSON document written by this store (header removed)."""
        ...


class ForestCodecPort(ABC):
    """Port for serialising fitted forests."""

    @abstractmethod
    def encode(self, forest: Forest) -> dict[str, Any]:
        """Forest to a JSON-compatible document."""
        ...

    @abstractmethod
    def decode(self, document: Mapping[str, Any]) -> Forest:
        """JSON document back to a Forest."""
        ...


class PlotRendererPort(ABC):
    """Port for rendering figures."""

    @abstractmethod
    def roc_overlay(self, curves: Mapping[str, RocCurve], title: str) -> str:
        """One ROC curve per model on shared axes, AUC in the legend."""
        ...

    @abstractmethod
    def dendrogram(self, dend: Dendrogram, partition: ModulePartition) -> str:
        """Clustering tree with a module color bar under the leaves."""
        ...
