from abc import ABC, abstractmethod


class BaseAdapter(ABC):
    """Transactional storage: nothing written is visible until ``commit``.

    Used as a context manager, a clean exit commits and an exception discards.
    """

    @abstractmethod
    def commit(self) -> None:
        pass

    @abstractmethod
    def discard(self) -> None:
        pass

    def close(self) -> None:
        self.discard()

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        if exc_type is None:
            self.commit()
        else:
            self.discard()
