"""Exception hierarchy shared across the pipeline.

Every error carries a short machine-readable ``code`` so callers (and the
CLI) can branch without string-matching messages.
"""

from __future__ import annotations


class E2TError(Exception):
    """Base class for all pipeline errors."""

    code = "E2T_ERROR"

    def __init__(self, message: str = ""):
        super().__init__(message or self.code)


class ValidationError(E2TError):
    code = "VALIDATION"


class RejectEmptyDescription(ValidationError):
    code = "REJECT_EMPTY_DESCRIPTION"


class RejectBadDim(ValidationError):
    code = "REJECT_BAD_DIM"


class RejectBadNorm(ValidationError):
    code = "REJECT_BAD_NORM"


class RejectTimeRegression(ValidationError):
    code = "REJECT_TIME_REGRESSION"


class DimMismatch(E2TError):
    code = "DIM_MISMATCH"


class EmptyCluster(E2TError):
    code = "EMPTY_CLUSTER"


class RemoteError(E2TError):
    """Base for remote-call failures that trigger local fallback."""

    code = "REMOTE"


class RemoteTimeout(RemoteError):
    code = "TIMEOUT"


class RemoteTransport(RemoteError):
    code = "TRANSPORT"


class RemoteBadDim(RemoteError):
    code = "BAD_DIM"


class ParseFailure(RemoteError):
    code = "PARSE_FAILURE"


class Malformed(E2TError):
    code = "MALFORMED"


class MissingContent(E2TError):
    code = "MISSING_CONTENT"


class SnapshotCorrupt(E2TError):
    code = "CORRUPT"


class VersionUnsupported(E2TError):
    code = "VERSION_UNSUPPORTED"


class SnapshotInconsistent(E2TError):
    code = "CONSISTENCY"


class DegenerateLabels(E2TError):
    code = "DEGENERATE_LABELS"


class LengthMismatch(E2TError):
    code = "LENGTH_MISMATCH"


class NotOneHot(E2TError):
    code = "NOT_ONE_HOT"


class NotSimplex(E2TError):
    code = "NOT_SIMPLEX"


class ZeroVector(E2TError):
    code = "ZERO_VECTOR"


class EmptySequence(E2TError):
    code = "EMPTY_SEQUENCE"


class NonFinite(E2TError):
    code = "NON_FINITE"
