"""Exception hierarchy shared across the package."""


class II2SError(Exception):
    """Base class for all package errors."""


class InvalidInputError(II2SError, ValueError):
    """Input values are malformed (wrong shape, non-finite, out of range)."""


class InvalidModelError(II2SError, ValueError):
    """A whitening model violates its invariants."""


class RankDeficiencyError(InvalidModelError):
    """Too few (or degenerate) samples to estimate a full-rank covariance."""


class StaleCodeError(II2SError, ValueError):
    """A whitened code was produced by a different whitening model."""


class IncompatibleArtifactError(II2SError):
    """Artifacts on disk cannot be combined (fingerprint, shape or layout mismatch)."""


class UnsupportedCheckpointError(IncompatibleArtifactError):
    """A generator checkpoint has a layout this package cannot read."""


class DivergedError(II2SError, FloatingPointError):
    """An optimization produced a non-finite loss."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = list(trace or [])
