"""Output-directory artifact store adapter."""

import json
from collections.abc import Mapping
from pathlib import Path
from typing import Any

import pandas as pd
import structlog

from fuzzyforest.domain.ports import ArtifactStorePort

logger = structlog.get_logger(__name__)

META_KEY = "meta"


def _header_lines(header: Mapping[str, Any]) -> list[str]:
    return [f"{key}: {json.dumps(header[key], sort_keys=True)}" for key in sorted(header)]


class FilesystemArtifactStore(ArtifactStorePort):
    """
    Writes artifacts under one output directory.

    Every file starts with the provenance header: ``#`` lines for CSV, a
    ``meta`` object for JSON and an XML comment for SVG. Output is a pure
    function of its inputs so reruns are byte-identical.
    """

    def __init__(self, root: Path) -> None:
        self.root = Path(root)

    def _target(self, name: str) -> Path:
        path = self.root / name
        path.parent.mkdir(parents=True, exist_ok=True)
        return path

    def write_table(self, name: str, frame: pd.DataFrame, header: Mapping[str, Any]) -> Path:
        path = self._target(name)
        body = frame.to_csv(index=False, lineterminator="\n")
        lines = [f"# {line}\n" for line in _header_lines(header)]
        path.write_text("".join(lines) + body, encoding="utf-8")
        logger.debug("artifact.write", path=str(path), rows=len(frame))
        return path

    def write_json(self, name: str, document: Mapping[str, Any], header: Mapping[str, Any]) -> Path:
        path = self._target(name)
        payload = {META_KEY: dict(header), **document}
        path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        logger.debug("artifact.write", path=str(path))
        return path

    def write_svg(self, name: str, svg: str, header: Mapping[str, Any]) -> Path:
        path = self._target(name)
        # "--" may not appear inside an XML comment
        comment = "\n".join(line.replace("--", "- -") for line in _header_lines(header))
        path.write_text(f"<!--\n{comment}\n-->\n{svg}", encoding="utf-8")
        logger.debug("artifact.write", path=str(path))
        return path

    def read_json(self, path: Path) -> dict[str, Any]:
        document: dict[str, Any] = json.loads(Path(path).read_text(encoding="utf-8"))
        document.pop(META_KEY, None)
        return document
