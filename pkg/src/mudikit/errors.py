"""Exception and warning taxonomy shared by every mudikit module.

Errors are grouped by contract: parameter errors mean the caller passed
something the operation rejects up front; format errors mean bytes on disk
do not match an interchange format; contract errors mean two otherwise-valid
inputs disagree with each other (e.g. mismatched dimensions).
"""

from __future__ import annotations


class MudikitError(Exception):
    """Base class for all mudikit domain errors."""


class ParameterError(MudikitError):
    """An argument violates an operation's precondition."""


class DegenerateSizeError(ParameterError):
    """A geometric operation would produce an extent below one pixel."""


class DoesNotFitError(ParameterError):
    """A subject does not fit inside the target canvas."""


class EmptyMaskError(ParameterError):
    """A mask with no foreground pixels where foreground is required."""


class PoolExhaustedError(MudikitError):
    """Augmentation fired but no subject of a different class exists."""


class ContractError(MudikitError):
    """Two valid-looking inputs are mutually inconsistent."""


class ScheduleError(MudikitError):
    """A noise schedule cannot be built or used as requested."""


class StatisticUndefinedError(MudikitError):
    """The requested statistic does not exist for this input."""


class DeterminismError(MudikitError):
    """A computation that must be deterministic returned two values."""


class FormatError(MudikitError):
    """Base class for interchange-format violations."""


class BadMagicError(FormatError):
    """The file does not start with the expected magic bytes."""


class UnsupportedVersionError(FormatError):
    """The file's format version is not one this reader understands."""


class TruncatedFileError(FormatError):
    """The file ends before its declared payload does."""


class NonFiniteValueError(FormatError):
    """A payload contains NaN or infinity where finite values are required."""


class MetadataError(FormatError):
    """A required sidecar or metadata field is missing or malformed."""


class SchemaError(FormatError):
    """A structured document violates its schema (unknown key, bad type)."""


class LayoutValidationError(FormatError):
    """A layout file contains an invalid box."""


class SaturationWarning(UserWarning):
    """Initialization strength is in the regime known to saturate output."""


class RenormalizationWarning(UserWarning):
    """Stored vectors deviated from unit norm enough to need correction."""
