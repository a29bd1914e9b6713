"""Exception types shared across the pipeline.

Every failure mode that callers are expected to branch on gets its own
class; the CLI maps them onto exit codes (data-format problems exit 3,
config problems exit 2, everything else exits 1).
"""


class SeasonalAdsError(Exception):
    """Base class for all errors raised by this package."""


class FormatError(SeasonalAdsError):
    """A file or payload does not match its declared format."""

    def __init__(self, message, path=None, line=None):
        if path is not None and line is not None:
            message = f"{path}:{line}: {message}"
        elif path is not None:
            message = f"{path}: {message}"
        super().__init__(message)
        self.path = path
        self.line = line


class DuplicateIdError(FormatError):
    """Two records in one corpus share an id."""


class DimMismatchError(FormatError):
    """An embedding vector's length disagrees with its modality's dimension."""


class VersionMismatchError(FormatError):
    """A stored artifact was written by a newer format version."""


class ConfigError(SeasonalAdsError):
    """Pipeline configuration is missing, malformed, or has unknown keys."""


class UncoveredYearError(SeasonalAdsError):
    """A lookup-table date rule has no entry for the requested year."""


class EmptyMatchedSetError(SeasonalAdsError):
    """Secondary mining needs a non-empty primary-matched subset."""


class NoGoldOverlapError(SeasonalAdsError):
    """No matched ad has a gold label, so quality cannot be estimated."""


class NoGoldPositivesError(SeasonalAdsError):
    """The gold sample contains no positive for the target event."""


class TemplateError(SeasonalAdsError):
    """A prompt or task template is missing a required placeholder."""


class UnknownTaskError(SeasonalAdsError):
    """An annotator response references a task id that was never exported."""


class UnparseableResponseError(SeasonalAdsError):
    """No decision could be extracted from a model response."""


class EndpointError(SeasonalAdsError):
    """Transport-level failure talking to an external inference endpoint.

    When raised from a batch operation, ``partial`` carries whatever
    results were assembled before the failure.
    """

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class MissingContentError(SeasonalAdsError):
    """An ad lacks the content required for the requested modality."""


class EmptyPositivesError(SeasonalAdsError):
    """Binary balancing requires at least one positive example."""


class ClassTooSmallError(SeasonalAdsError):
    """Stratified splitting needs at least two examples per class."""


class NTooLargeError(SeasonalAdsError):
    """A subsample size exceeds the available examples."""


class BothAbsentError(SeasonalAdsError):
    """Fusion needs at least one modality present."""


class BadClassIndexError(SeasonalAdsError):
    """A training label is outside the model's class range."""


class NonFiniteLossError(SeasonalAdsError):
    """Training diverged; the loss left the finite range."""


class LengthMismatchError(SeasonalAdsError):
    """Gold and predicted label sequences have different lengths."""


class UnknownLabelError(SeasonalAdsError):
    """A label is not a member of the evaluated class set."""


class EmptyStreamError(SeasonalAdsError):
    """A delivery stream contains no events."""


class KTooLargeError(SeasonalAdsError):
    """The smoothing width exceeds the number of defined-ratio windows."""
