"""
Exception hierarchy shared by every stage of the analysis.
"""

from typing import Optional


class QuakeModesError(Exception):
    """Base class for all analysis errors."""


class ConfigError(QuakeModesError, ValueError):
    """Invalid run configuration."""


class StageInputError(QuakeModesError):
    """A stage was asked to resume but its input files are missing."""


# -----------------------------------------------------------------------------
# Catalog
# -----------------------------------------------------------------------------
class MalformedBlockError(QuakeModesError, ValueError):
    """An NDK block has the wrong number of lines or an unparsable field."""

    def __init__(self, message: str, line_number: Optional[int] = None):
        self.line_number = line_number
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)


class InvalidRecordError(MalformedBlockError):
    """A parsed record violates a MomentTensorRecord invariant."""


# -----------------------------------------------------------------------------
# Classifier
# -----------------------------------------------------------------------------
class EmptyClassError(QuakeModesError, ValueError):
    """A depth class has no feature vectors."""


class EmptyDirectionError(QuakeModesError, ValueError):
    """The two class means coincide, so there is no projection direction."""


class TooFewSamplesError(QuakeModesError, ValueError):
    """Not enough samples for a density estimate."""


class DegenerateSampleError(TooFewSamplesError):
    """All samples are equal (zero spread)."""


class ModelNotFittedError(QuakeModesError):
    """The projection model has no threshold yet."""


# -----------------------------------------------------------------------------
# Binning
# -----------------------------------------------------------------------------
class OverlappingRegionsError(QuakeModesError, ValueError):
    """Two region anchors define overlapping 15 degree squares."""


class OutOfRangeError(QuakeModesError, ValueError):
    """A timestamp falls outside the configured analysis span."""


# -----------------------------------------------------------------------------
# Statistics
# -----------------------------------------------------------------------------
class SeriesTooShortError(QuakeModesError, ValueError):
    """Presence series too short for the requested lag."""


class LengthMismatchError(QuakeModesError, ValueError):
    """Binary vectors of different lengths."""


class EmptyInputError(QuakeModesError, ValueError):
    """No p-values to select from."""


class TooLongForExactError(QuakeModesError, ValueError):
    """Series too long for exhaustive permutation enumeration."""
