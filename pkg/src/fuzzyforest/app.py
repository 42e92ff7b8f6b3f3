"""Application composition root."""

from dataclasses import dataclass
from pathlib import Path

from fuzzyforest.adapters.outbound.artifacts.filesystem_store import FilesystemArtifactStore
from fuzzyforest.adapters.outbound.codec.forest_json import ForestJsonCodec
from fuzzyforest.adapters.outbound.plots.svg_renderer import SvgPlotRenderer
from fuzzyforest.adapters.outbound.tables.csv_table import CsvTableSource
from fuzzyforest.services import (
    CrosstabReport,
    DatasetPreparer,
    EvaluateModels,
    FormModules,
    IngestTable,
    SelectFeatures,
    SynthesizeData,
)


@dataclass
class Services:
    """One service per CLI command, sharing adapters."""

    preparer: DatasetPreparer
    synth: SynthesizeData
    ingest: IngestTable
    modules: FormModules
    select: SelectFeatures
    evaluate: EvaluateModels
    crosstab: CrosstabReport


def create_services(out_dir: Path) -> Services:
    """Create domain services with dependencies writing under ``out_dir``."""
    store = FilesystemArtifactStore(out_dir)
    renderer = SvgPlotRenderer()
    codec = ForestJsonCodec()
    preparer = DatasetPreparer(CsvTableSource())
    return Services(
        preparer=preparer,
        synth=SynthesizeData(store),
        ingest=IngestTable(preparer, store),
        modules=FormModules(preparer, store, renderer),
        select=SelectFeatures(preparer, store, codec),
        evaluate=EvaluateModels(preparer, store, renderer, codec),
        crosstab=CrosstabReport(preparer, store),
    )
