"""Exception types shared across the package."""


class FloodromError(Exception):
    """Base class for all package-specific errors."""


class GeometryError(FloodromError, ValueError):
    """A well segment or cell index falls outside the model domain."""


class SingularSystemError(FloodromError):
    """The pressure system could not be solved to tolerance.

    Raised when factorization fails outright (e.g. no wells anchor the
    pressure level) or when the verified residual exceeds tolerance.
    """


class StabilityError(FloodromError):
    """An explicit transport step was attempted beyond its stable limit."""


class RankError(FloodromError, ValueError):
    """More basis vectors were requested than the snapshot data supports."""

    def __init__(self, requested: int, achievable: int):
        self.requested = requested
        self.achievable = achievable
        super().__init__(
            f"requested {requested} basis vectors but the snapshot set "
            f"supports at most {achievable}"
        )


class AugmentationError(FloodromError):
    """Residual enrichment of a basis was refused or failed.

    Raised when candidate residual directions are numerically
    indistinguishable from noise, or when the augmented block cannot be
    orthonormalized against the existing basis.
    """


class BasisInadequacyError(FloodromError):
    """A reduced pressure solve produced a non-physical field.

    Signals that the projection basis cannot represent the pressure state
    for the current well configuration.
    """


class AlignmentError(FloodromError, ValueError):
    """Two rate series cannot be compared on a common time grid."""


class UndefinedMetricError(FloodromError, ValueError):
    """A relative error metric has no defined value (constant reference)."""


class ConfigError(FloodromError, ValueError):
    """A scenario configuration file is malformed or inconsistent."""
