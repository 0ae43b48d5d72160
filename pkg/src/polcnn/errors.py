"""Exception types shared across the package.

Errors caused by user-supplied inputs (malformed files, bad flags, missing
records) derive from InputDataError so the CLI can map them to exit status 2.
Everything else is treated as an internal error (exit status 1).
"""


class InputDataError(Exception):
    """A problem with user-supplied data or configuration."""


class IngestError(InputDataError):
    """Corpus ingestion failed."""


class RecordError(IngestError):
    """A single ingested record is malformed."""

    def __init__(self, line: int, reason: str):
        super().__init__(f"line {line}: {reason}")
        self.line = line
        self.reason = reason


class EmbeddingError(InputDataError):
    """An embedding table, store, or lookup is invalid."""


class SembFormatError(EmbeddingError):
    """A SEMB stream violates the binary format."""

    def __init__(self, offset: int, reason: str):
        super().__init__(f"offset {offset}: {reason}")
        self.offset = offset
        self.reason = reason


class ModelFormatError(InputDataError):
    """A model file is corrupt, truncated, or has an unsupported version."""


class TrainingError(InputDataError):
    """Training or evaluation could not proceed on the given inputs."""


class SuiteError(TrainingError):
    """An experiment inside a suite failed; the message names the experiment."""
