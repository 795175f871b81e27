"""Exception types shared across the shadow removal toolkit."""


class UmbraError(Exception):
    """Base class for all domain errors raised by this package."""


class InvalidInputError(UmbraError, ValueError):
    """Input image/field does not satisfy the operation's preconditions."""


class InvalidParameterError(UmbraError, ValueError):
    """Filter or algorithm parameter is out of its valid range."""


class InsufficientStrokesError(UmbraError):
    """Detection needs at least one shadow stroke and one lit stroke."""


class ConflictingStrokesError(UmbraError):
    """Shadow and lit strokes rasterize to overlapping pixels."""

    def __init__(self, message: str, conflicts=None):
        super().__init__(message)
        self.conflicts = list(conflicts) if conflicts is not None else []


class DegenerateFusionError(UmbraError):
    """Stroke samples have no usable spread; fusion factors are undefined."""


class NoShadowError(UmbraError):
    """Detection produced an empty shadow mask."""


class DegenerateSampleError(UmbraError):
    """A sampling line could not be grown (flat gradient or too short)."""


class NoValidSamplesError(UmbraError):
    """Outlier filtering left no usable sampling lines."""


class NoScalesError(UmbraError):
    """No sparse scale samples are available for densification."""


class InvalidPairError(UmbraError, ValueError):
    """Shadow / ground-truth image pair has mismatched dimensions."""


class ShadowFreeCaseError(UmbraError):
    """Baseline error is zero; the error ratio is undefined."""


class EmptyDatasetError(UmbraError):
    """Dataset directory contains no valid cases."""
