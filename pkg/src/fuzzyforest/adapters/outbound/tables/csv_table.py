"""CSV table source adapter."""

import csv
from collections.abc import Mapping, Sequence
from pathlib import Path

import structlog

from fuzzyforest.domain.data_pipeline import build_table
from fuzzyforest.domain.errors import TableFormatError
from fuzzyforest.domain.models import DEFAULT_SENTINELS, ColumnKind, RawTable
from fuzzyforest.domain.ports import TableSourcePort

logger = structlog.get_logger(__name__)

# provenance lines written by the artifact store
COMMENT_PREFIX = "#"


def parse_csv_text(
    text: str,
    source: str = "<text>",
    schema: Mapping[str, ColumnKind] | None = None,
    sentinels: Sequence[str] = DEFAULT_SENTINELS,
) -> RawTable:
    """
    Parse RFC-4180 CSV text; leading ``#`` lines are skipped.

    Raises:
        TableFormatError: On a missing header, duplicate header names or ragged rows
    """
    lines = text.splitlines(keepends=True)
    start = 0
    while start < len(lines) and lines[start].startswith(COMMENT_PREFIX):
        start += 1
    reader = csv.reader(lines[start:], strict=True)
    records: list[tuple[int, list[str]]] = []
    try:
        for record in reader:
            records.append((start + reader.line_num, record))
    except csv.Error as e:
        raise TableFormatError(source, f"line {start + reader.line_num}: {e}") from e

    if not records or not records[0][1]:
        raise TableFormatError(source, "no header row")
    header = records[0][1]
    duplicates = sorted({name for name in header if header.count(name) > 1})
    if duplicates:
        raise TableFormatError(source, f"duplicate header names {duplicates}")

    body = records[1:]
    while body and not body[-1][1]:
        body.pop()
    rows: list[list[str]] = []
    for line, row in body:
        # a blank line is an empty cell when there is a single column
        if not row:
            if len(header) != 1:
                continue
            row = [""]
        if len(row) != len(header):
            raise TableFormatError(
                source, f"line {line} has {len(row)} fields, header has {len(header)}"
            )
        rows.append(row)
    return build_table(header, rows, schema=schema, sentinels=sentinels)


def load_csv(
    path: Path | str,
    schema: Mapping[str, ColumnKind] | None = None,
    sentinels: Sequence[str] = DEFAULT_SENTINELS,
) -> RawTable:
    """
    Read a CSV file into a RawTable.

    Raises:
        FileNotFoundError: If ``path`` does not exist
        TableFormatError: If the file is not valid UTF-8 CSV
    """
    file_path = Path(path)
    try:
        text = file_path.read_text(encoding="utf-8")
    except UnicodeDecodeError as e:
        raise TableFormatError(str(file_path), f"invalid UTF-8: {e}") from e
    table = parse_csv_text(text, str(file_path), schema=schema, sentinels=sentinels)
    logger.info("table.load", path=str(file_path), rows=table.shape[0], columns=table.shape[1])
    return table


class CsvTableSource(TableSourcePort):
    """Reads survey tables from CSV files on disk."""

    def read(
        self,
        path: Path,
        schema: Mapping[str, ColumnKind] | None = None,
        sentinels: Sequence[str] = DEFAULT_SENTINELS,
    ) -> RawTable:
        return load_csv(path, schema=schema, sentinels=sentinels)
