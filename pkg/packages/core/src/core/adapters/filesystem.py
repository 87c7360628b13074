"""Filesystem artifact adapter.

Writes go to a staging directory next to the target; ``commit`` moves the
staged files into place and ``discard`` removes them, so a failed run leaves
no partial output behind.
"""

import csv
import json
import logging
import math
import shutil
import uuid
from pathlib import Path
from typing import Any, Iterable, Mapping, Optional, Sequence

from core.adapters.base_artifact import BaseArtifactAdapter

logger = logging.getLogger(__name__)


def format_cell(value: Any) -> str:
    """Render one CSV cell; floats keep full round-trip precision."""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        return format(value, ".17g")
    if value is None:
        return ""
    return str(value)


class FilesystemArtifactAdapter(BaseArtifactAdapter):
    """Artifact storage rooted at one output directory."""

    def __init__(self, root: Path, staged: bool = True):
        self.root = Path(root)
        self.staged = staged
        self._staging: Optional[Path] = None
        if staged:
            self._staging = self.root.parent / f".{self.root.name}.staging-{uuid.uuid4().hex[:8]}"
            self._staging.mkdir(parents=True, exist_ok=False)
        else:
            self.root.mkdir(parents=True, exist_ok=True)

    @property
    def write_dir(self) -> Path:
        return self._staging if self._staging is not None else self.root

    def _write_path(self, name: str) -> Path:
        path = self.write_dir / name
        path.parent.mkdir(parents=True, exist_ok=True)
        return path

    def _read_path(self, name: str) -> Path:
        if self._staging is not None and (self._staging / name).exists():
            return self._staging / name
        return self.root / name

    def write_table(self, name: str, columns: Sequence[str], rows: Iterable[Mapping[str, Any]]) -> None:
        path = self._write_path(name)
        try:
            with path.open("w", newline="", encoding="utf-8") as handle:
                writer = csv.writer(handle, lineterminator="\n")
                writer.writerow(columns)
                for row in rows:
                    writer.writerow([format_cell(row.get(column)) for column in columns])
        except OSError as e:
            raise RuntimeError(f"Writing table {name} failed: {str(e)}") from e
        logger.debug(f"Wrote table {path}")

    def read_table(self, name: str) -> list[dict[str, str]]:
        path = self._read_path(name)
        try:
            with path.open("r", newline="", encoding="utf-8") as handle:
                return list(csv.DictReader(handle))
        except OSError as e:
            raise RuntimeError(f"Reading table {name} failed: {str(e)}") from e

    def write_document(self, name: str, document: Mapping[str, Any]) -> None:
        path = self._write_path(name)
        try:
            path.write_text(json.dumps(document, sort_keys=True, indent=2) + "\n", encoding="utf-8")
        except OSError as e:
            raise RuntimeError(f"Writing document {name} failed: {str(e)}") from e
        logger.debug(f"Wrote document {path}")

    def read_document(self, name: str) -> dict[str, Any]:
        path = self._read_path(name)
        try:
            return json.loads(path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as e:
            raise RuntimeError(f"Reading document {name} failed: {str(e)}") from e

    def commit(self) -> None:
        """Move staged files into the output directory, replacing same-named files."""
        if self._staging is None:
            return
        self.root.mkdir(parents=True, exist_ok=True)
        for staged in sorted(self._staging.rglob("*")):
            if staged.is_file():
                target = self.root / staged.relative_to(self._staging)
                target.parent.mkdir(parents=True, exist_ok=True)
                staged.replace(target)
        shutil.rmtree(self._staging, ignore_errors=True)
        logger.info(f"Committed artifacts to {self.root}")
        self._staging = None

    def discard(self) -> None:
        if self._staging is None:
            return
        shutil.rmtree(self._staging, ignore_errors=True)
        logger.warning(f"Discarded staged artifacts for {self.root}")
        self._staging = None
