from abc import abstractmethod
from typing import Any, Iterable, Mapping, Sequence

from .base import BaseAdapter


class BaseArtifactAdapter(BaseAdapter):
    """Storage for tabular results and their JSON sidecars."""

    @abstractmethod
    def write_table(self, name: str, columns: Sequence[str], rows: Iterable[Mapping[str, Any]]) -> None:
        pass

    @abstractmethod
    def read_table(self, name: str) -> list[dict[str, str]]:
        pass

    @abstractmethod
    def write_document(self, name: str, document: Mapping[str, Any]) -> None:
        pass

    @abstractmethod
    def read_document(self, name: str) -> dict[str, Any]:
        pass
