"""Artifact storage adapters."""

from .base import BaseAdapter
from .base_artifact import BaseArtifactAdapter
from .filesystem import FilesystemArtifactAdapter, format_cell

__all__ = ["BaseAdapter", "BaseArtifactAdapter", "FilesystemArtifactAdapter", "format_cell"]
