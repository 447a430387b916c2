"""Exception hierarchy for the assessment pipeline.

Validation-type errors (bad manifests, bad config, bad inputs) map to CLI
exit code 1; runtime failures (backends, numerics, I/O mid-run) map to 2.
"""


class AsaError(Exception):
    """Base class for all pipeline errors."""


class ValidationFailure(AsaError):
    """Base for errors caused by invalid user input or configuration."""


class RuntimeFailure(AsaError):
    """Base for errors raised while an otherwise valid run is executing."""


# -- validation --------------------------------------------------------------

class ManifestError(ValidationFailure):
    """Malformed manifest record; message names the offending record."""


class ReferentialIntegrityError(ValidationFailure):
    """A response cites a question set that does not exist."""


class InsufficientDataError(ValidationFailure):
    """Too few records to build the requested splits."""


class ConfigError(ValidationFailure):
    """Invalid pipeline configuration (unknown key, missing path, bad value)."""


class InputError(ValidationFailure):
    """Invalid direct argument to an operation (length mismatch, empty ref)."""


class CompatibilityError(ValidationFailure):
    """Checkpoint schemas do not match the feature store."""


# -- runtime -----------------------------------------------------------------

class TransportError(RuntimeFailure):
    """A remote backend was unreachable or returned a transport-level error."""


class SplittingError(RuntimeFailure):
    """Backend output could not be parsed into per-question segments."""

    def __init__(self, message, raw_output=None):
        super().__init__(message)
        self.raw_output = raw_output


class EmbeddingError(RuntimeFailure):
    """An embedding backend failed."""


class MediaError(RuntimeFailure):
    """An image or audio file could not be decoded or is unusable."""


class FitError(RuntimeFailure):
    """Normalizer fitting received no usable similarities."""


class NormalizerLookupError(RuntimeFailure):
    """normalize() was called for a question index that was never fitted."""


class CorrectionError(RuntimeFailure):
    """The GEC backend returned empty or unusable output."""


class TaxonomyError(RuntimeFailure):
    """An edit label cannot be placed in the frozen taxonomy."""


class AnnotationError(RuntimeFailure):
    """The syntactic annotation backend failed."""


class AlignmentError(RuntimeFailure):
    """Word timestamps are inconsistent with the audio they describe."""


class ShapeError(RuntimeFailure):
    """A tensor did not meet the model's dimension contract."""


class NumericError(RuntimeFailure):
    """Non-finite values appeared; message identifies the layer."""


class TrainingError(RuntimeFailure):
    """Training aborted (non-finite loss or similar)."""


class ExtractionError(RuntimeFailure):
    """One or more responses failed feature extraction."""
