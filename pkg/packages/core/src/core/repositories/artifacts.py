from typing import Any, Iterable, Mapping, Sequence, TypeVar

from pydantic import ValidationError

from core.errors import SchemaMismatchError
from core.models.artifacts import SCHEMA_VERSION, Artifact
from core.repositories.base import BaseRepository

A = TypeVar("A", bound=Artifact)


def sidecar_name(table_name: str) -> str:
    stem = table_name.rsplit(".", 1)[0]
    return f"{stem}.json"


class ArtifactRepository(BaseRepository):
    """Typed access to result tables and their JSON sidecars.

    Example:
        ```python
        with FilesystemArtifactAdapter(Path("out")) as adapter:
            repo = ArtifactRepository(adapter)
            repo.save_table("response.csv", columns, rows, sidecar)
        ```
    """

    def save_table(
        self,
        name: str,
        columns: Sequence[str],
        rows: Iterable[Mapping[str, Any]],
        sidecar: Artifact,
    ) -> None:
        self.adapter.write_table(name, columns, rows)
        self.save_report(sidecar_name(name), sidecar)

    def save_report(self, name: str, artifact: Artifact) -> None:
        self.adapter.write_document(name, artifact.model_dump(mode="json"))

    def load_report(self, name: str, model: type[A]) -> A:
        """Load a sidecar or report, refusing other schema versions."""
        document = self.adapter.read_document(name)
        version = document.get("schema_version")
        if version != SCHEMA_VERSION:
            raise SchemaMismatchError(f"{name} has schema version {version!r}, expected {SCHEMA_VERSION!r}")
        try:
            return model.model_validate(document)
        except ValidationError as e:
            raise SchemaMismatchError(f"{name} does not match the {model.__name__} schema: {str(e)}") from e

    def load_table(self, name: str, model: type[A]) -> tuple[list[dict[str, str]], A]:
        sidecar = self.load_report(sidecar_name(name), model)
        return self.adapter.read_table(name), sidecar
