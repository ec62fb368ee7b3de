"""Exception types shared across the package."""


class TopoAlignError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(TopoAlignError):
    """Inputs violate an operation's contract (CLI exit code 1)."""


class AllMaskedError(ValidationError):
    """Every mask entry is zero; pooling is undefined."""


class DimMismatchError(ValidationError):
    """Vector or matrix dimensions do not line up."""


class DegenerateTargetError(ValidationError):
    """Cosine-loss target has (near-)zero norm."""


class LayoutError(ValidationError):
    """Point cloud does not follow the 2B prompt/gold row layout."""


class UnknownTopicError(ValidationError):
    """Topic id does not resolve in the topic library."""


class NonFiniteLossError(ValidationError):
    """Scheduler received a NaN or infinite loss."""


class TooFewPointsError(ValidationError):
    """Fewer points than requested clusters."""


class EmptyTemplateSetError(ValidationError):
    """A topic has no embedded template pairs."""


class MissingScoreError(ValidationError):
    """A record id is absent from a score file."""


class SingleLabelCloudError(ValidationError):
    """Bridge statistics need both labels present."""


class LabelerUnavailableError(TopoAlignError):
    """The external labeler endpoint could not be reached."""


class FormatError(TopoAlignError):
    """Base class for file-format errors (CLI exit code 2)."""


class BadMagicError(FormatError):
    """File does not start with the expected magic bytes."""


class TruncatedPayloadError(FormatError):
    """File ends before the declared payload is complete."""


class LabelOutOfRangeError(FormatError):
    """A label is neither 0 nor 1."""


class MalformedRecordError(FormatError):
    """A record is missing fields or carries the wrong types."""
