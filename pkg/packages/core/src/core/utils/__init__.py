"""Core utility functions."""

from .hashing import stable_hash
from .parallel import chunked, ordered_map

__all__ = ["chunked", "ordered_map", "stable_hash"]
