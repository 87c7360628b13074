from .artifacts import ArtifactRepository, sidecar_name
from .base import BaseRepository

__all__ = ["ArtifactRepository", "BaseRepository", "sidecar_name"]
