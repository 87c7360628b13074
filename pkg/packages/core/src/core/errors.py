"""Errors shared by the configuration and artifact layers."""


class ConfigValidationError(ValueError):
    """Raised when an experiment configuration violates one or more requirements.

    All problems found are collected in ``messages`` so they can be reported
    together before anything runs.
    """

    def __init__(self, messages: list[str]):
        self.messages = list(messages)
        super().__init__("Invalid experiment configuration:\n" + "\n".join(f"  - {m}" for m in self.messages))


class SchemaMismatchError(ValueError):
    """Raised when an artifact was written with a different schema version."""
