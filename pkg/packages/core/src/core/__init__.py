"""
Core package containing shared configuration, models, and storage.

This package provides:
- Experiment settings with environment, dotenv and TOML layering
- Transport lab enums
- Phantom, artifact and stability report models
- Filesystem artifact storage with staged commits
- Deterministic thread fan-out and hashing helpers
"""

__version__ = "0.1.0"
