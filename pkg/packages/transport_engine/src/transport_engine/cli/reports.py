"""Golden-file comparison of reports and result tables."""

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterator, Optional

from pydantic import BaseModel

from core.adapters import FilesystemArtifactAdapter
from core.errors import SchemaMismatchError
from core.models import SCHEMA_VERSION
from core.repositories import ArtifactRepository, sidecar_name

logger = logging.getLogger(__name__)

RELATIVE_TOLERANCE = 1e-9


class ReportDifference(BaseModel):
    """One value that differs between two artifacts."""

    path: str
    first: Any
    second: Any


@dataclass(frozen=True)
class _Artifact:
    repository: ArtifactRepository
    name: str

    @classmethod
    def open(cls, path: Path) -> "_Artifact":
        path = Path(path)
        if not path.is_file():
            raise SchemaMismatchError(f"{path} is not a report or table file")
        adapter = FilesystemArtifactAdapter(path.parent, staged=False)
        return cls(ArtifactRepository(adapter), path.name)

    @property
    def is_table(self) -> bool:
        return self.name.lower().endswith(".csv")

    def schema_version(self) -> Optional[str]:
        """None only for a table written without a sidecar."""
        document_name = sidecar_name(self.name) if self.is_table else self.name
        try:
            document = self.repository.adapter.read_document(document_name)
        except RuntimeError:
            if self.is_table:
                return None
            raise
        version = document.get("schema_version")
        if version is None:
            raise SchemaMismatchError(f"{document_name} carries no schema version")
        return version

    def content(self) -> Any:
        if self.is_table:
            return self.repository.adapter.read_table(self.name)
        return self.repository.adapter.read_document(self.name)


def _number(value: Any) -> Optional[float]:
    if isinstance(value, bool):
        return None
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        try:
            return float(value)
        except ValueError:
            return None
    return None


def values_match(first: Any, second: Any, relative_tolerance: float = RELATIVE_TOLERANCE) -> bool:
    """Numbers (also numeric CSV cells) compare with a relative tolerance, everything else exactly."""
    a, b = _number(first), _number(second)
    if a is None or b is None:
        return first == second
    if math.isnan(a) or math.isnan(b):
        return math.isnan(a) and math.isnan(b)
    return math.isclose(a, b, rel_tol=relative_tolerance, abs_tol=0.0) or a == b


def _walk(first: Any, second: Any, path: str, relative_tolerance: float) -> Iterator[ReportDifference]:
    if isinstance(first, dict) and isinstance(second, dict):
        for key in sorted(set(first) | set(second)):
            child = f"{path}.{key}" if path else str(key)
            if key not in first or key not in second:
                yield ReportDifference(path=child, first=first.get(key), second=second.get(key))
            else:
                yield from _walk(first[key], second[key], child, relative_tolerance)
    elif isinstance(first, list) and isinstance(second, list):
        if len(first) != len(second):
            yield ReportDifference(path=f"{path}.length", first=len(first), second=len(second))
        for index, (a, b) in enumerate(zip(first, second)):
            yield from _walk(a, b, f"{path}[{index}]", relative_tolerance)
    elif not values_match(first, second, relative_tolerance):
        yield ReportDifference(path=path, first=first, second=second)


def diff_reports(
    first: Path, second: Path, relative_tolerance: float = RELATIVE_TOLERANCE
) -> list[ReportDifference]:
    """Per-value differences between two report JSON files or two result tables.

    Both files have to carry the current schema version (tables through their
    sidecar, when one exists).
    """
    artifacts = [_Artifact.open(first), _Artifact.open(second)]
    if artifacts[0].is_table != artifacts[1].is_table:
        raise SchemaMismatchError("A table can only be compared with another table")
    for path, artifact in zip((first, second), artifacts):
        version = artifact.schema_version()
        if version is not None and version != SCHEMA_VERSION:
            raise SchemaMismatchError(f"{path} has schema version {version!r}, expected {SCHEMA_VERSION!r}")
    differences = list(_walk(artifacts[0].content(), artifacts[1].content(), "", relative_tolerance))
    logger.info(f"{len(differences)} differences between {first} and {second}")
    return differences
