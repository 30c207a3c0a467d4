"""Exception hierarchy.

Four branches correspond to the CLI exit codes: config (2), input/io (3),
validation (4), compute (5).
"""


class GazefuseError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(GazefuseError):
    """Bad or inconsistent run configuration."""


class InputError(GazefuseError):
    """Missing or unreadable input file."""


class ValidationError(GazefuseError):
    """Input data violates a schema or domain invariant."""


class ComputeError(GazefuseError):
    """A computation cannot produce a meaningful result."""


# --- parsing ---

class MalformedRow(ValidationError):
    """CSV row with the wrong column count or an unparsable cell."""


class NonMonotonicTime(ValidationError):
    """Timestamps are not strictly increasing."""


class IrregularSampling(ValidationError):
    """Sample spacing deviates from the nominal rate by more than 10%."""


class EmptyRecording(ValidationError):
    """Recording has no rows or no usable gaze samples."""


class DimensionMismatch(ValidationError):
    """Vector or feature-row length differs from what was declared."""


class DuplicateKey(ValidationError):
    """Two records share a key that must be unique."""


class UnknownTask(ValidationError):
    """Task name outside the supported set."""


# --- preprocessing ---

class TooShort(ValidationError):
    """Signal shorter than the filter window."""


class DegenerateStats(ComputeError):
    """Zero variance; normalization statistics are unusable."""


class DataLeakage(ValidationError):
    """Held-out data reached a train-only computation."""


# --- offset scoring ---

class OutOfRange(ValidationError):
    """Gaze angle outside the representable half-sphere."""


class NoTargetData(ValidationError):
    """Recording carries no target positions."""


class NoFixationData(ComputeError):
    """No fixation-covered samples to aggregate."""


# --- embeddings ---

class MissingWindow(ValidationError):
    """Required window index absent from the embedding set."""


class MissingFold(ValidationError):
    """Required fold absent from the embedding set."""


class ZeroVector(ComputeError):
    """Cosine similarity against an all-zero vector."""


# --- fusion ---

class AlphaOutOfRange(ValidationError):
    """Weighted-fusion alpha outside [0.5, 1.0]."""


class MissingModality(ValidationError):
    """A score required by the fusion mode is absent."""


class MissingTask(ValidationError):
    """Cross-task pairing has no counterpart recording."""


class SubjectLeakage(ValidationError):
    """A subject appears on both sides of a train/test split."""


# --- evaluation ---

class MissingSession(ValidationError):
    """Subject lacks an enrollment or authentication session."""


class EmptyClass(ValidationError):
    """Genuine or impostor score list is empty."""


class TooFewSubjects(ValidationError):
    """Fewer subjects than requested folds."""


class InsufficientGroups(ValidationError):
    """Fewer distinct groups than inner CV folds."""
