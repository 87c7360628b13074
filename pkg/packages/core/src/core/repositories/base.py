from abc import ABC

from core.adapters.base_artifact import BaseArtifactAdapter


class BaseRepository(ABC):
    def __init__(self, adapter: BaseArtifactAdapter):
        self.adapter = adapter
