"""Exception hierarchy shared by all engine modules.

Every error raised on purpose by this package derives from EngineError, so
callers can catch one base type at process boundaries (the CLI maps
subfamilies to exit codes).
"""

from __future__ import annotations


class EngineError(Exception):
    """Base class for all errors raised by this package."""


# --- tokenizer / instruction library ---------------------------------------


class EmptyLibrary(EngineError):
    """An operation that needs at least one instruction got none."""


class UnknownToken(EngineError):
    """A word is not part of the active vocabulary."""

    def __init__(self, word: str):
        super().__init__(f"unknown token: {word!r}")
        self.word = word


class DuplicateInstruction(EngineError):
    """Two instructions tokenize to the same token-id sequence."""


# --- prefix tree / decoding -------------------------------------------------


class InvalidPrefix(EngineError):
    """A token prefix does not describe a path in the trie."""


class DimensionMismatch(EngineError):
    """A vector's length disagrees with the expected dimension."""


class ScorerFailure(EngineError):
    """The next-token scoring callback raised; the cause is chained."""


class KTooLarge(EngineError):
    """Requested more ranked instructions than the library holds."""


# --- embedding ---------------------------------------------------------------


class EmptyText(EngineError):
    """Cannot embed an empty string."""


class DegenerateEmbedding(EngineError):
    """Input produced an all-zero count vector (whitespace-only text)."""


class ZeroNorm(EngineError):
    """Cosine similarity is undefined for a zero-length vector."""


# --- template library --------------------------------------------------------


class DuplicateId(EngineError):
    """A template with this id already exists in the library."""


class SummarizerFailure(EngineError):
    """The summarization backend failed for one cluster."""


class MalformedTemplateResponse(EngineError):
    """Summarizer output could not be parsed into a template."""


# --- model backend -----------------------------------------------------------


class BackendUnreachable(EngineError):
    """The model service could not be reached or returned a non-200 status."""


class NoScriptMatch(EngineError):
    """No mock script entry matched the serialized request."""


class MalformedResponse(EngineError):
    """Backend response missing the field required by the request mode."""


# --- pipeline ----------------------------------------------------------------


class MalformedReasoning(EngineError):
    """Reasoning text violates the delimiter or stage-order contract."""


class PipelineStageError(EngineError):
    """Wraps a failure with the pipeline stage it occurred in."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.__cause__ = cause


class IOFailure(EngineError):
    """A file read or write failed."""


class InvariantViolation(EngineError):
    """A value violates one of its declared invariants."""


# --- evaluation ----------------------------------------------------------------


class LengthMismatch(EngineError):
    """Parallel prediction/gold lists have different lengths."""


class UnknownInstructionId(EngineError):
    """An instruction id is not part of the active library."""
