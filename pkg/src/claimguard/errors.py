"""Exception hierarchy shared across the package.

Every error raised by claimguard derives from ClaimGuardError so callers
(service handlers, CLI) can map domain failures to structured responses and
exit codes without catching bare Exception.
"""

from __future__ import annotations


class ClaimGuardError(Exception):
    """Base class for all claimguard domain errors."""

    code = "error"


class ValidationError(ClaimGuardError):
    """Input violates a documented contract (bad field, missing evidence kind)."""

    code = "validation"

    def __init__(self, message: str, field: str | None = None) -> None:
        super().__init__(message)
        self.field = field


class DuplicateClaimError(ClaimGuardError):
    """claim_id already present in the store."""

    code = "duplicate_claim"


class NotFoundError(ClaimGuardError):
    """Referenced claim / image / entry does not exist."""

    code = "not_found"


class IllegalTransitionError(ClaimGuardError):
    """Status change not allowed by the claim lifecycle."""

    code = "illegal_transition"

    def __init__(self, claim_id: str, old: str, new: str) -> None:
        super().__init__(f"claim {claim_id}: illegal status transition {old} -> {new}")
        self.old = old
        self.new = new


class LayoutMismatchError(ClaimGuardError):
    """Descriptor block layout differs from the store's configured layout."""

    code = "layout_mismatch"


class DecodeError(ClaimGuardError):
    """Image bytes could not be decoded; message names the failing stage."""

    code = "decode"


class EmptyRoiError(ClaimGuardError):
    """Bounding box lies entirely outside the image frame."""

    code = "empty_roi"


class DimensionMismatchError(ClaimGuardError):
    """Vector dimensions disagree (cosine operands, fusion blocks)."""

    code = "dimension_mismatch"


class MissingEmbeddingError(ClaimGuardError):
    """Lookup embedding provider has no vector for the requested image id."""

    code = "missing_embedding"


class ConfigError(ClaimGuardError):
    """Invalid configuration value (non-square toy dim, bad weights, ...)."""

    code = "config"


class StorageError(ClaimGuardError):
    """Corrupt or inconsistent on-disk store state."""

    code = "storage"


class PipelineError(ClaimGuardError):
    """A submission pipeline stage failed; carries the stage name."""

    code = "pipeline"

    def __init__(self, stage: str, message: str) -> None:
        super().__init__(message)
        self.stage = stage
