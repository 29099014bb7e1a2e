"""Exception hierarchy shared across the package."""


class RepdensityError(Exception):
    """Base class for all errors raised by this package."""

    #: short machine-readable tag used by the CLI error JSON
    kind = "error"


class FormatError(RepdensityError):
    """File does not start with the expected magic or declares an unsupported version."""

    kind = "format"


class CorruptionError(RepdensityError):
    """File header and payload disagree (truncated or overlong payload)."""

    kind = "corruption"


class ValidationError(RepdensityError):
    """Data violates an invariant (non-finite values, mismatched lengths, ...)."""

    kind = "validation"


class ParameterError(RepdensityError):
    """An argument is outside its documented domain."""

    kind = "parameter"


class InsufficientDataError(RepdensityError):
    """Operation needs more observations than were supplied."""

    kind = "insufficient_data"


class ConfigurationError(RepdensityError):
    """Inconsistent run configuration (e.g. class present in data but lacking a model)."""

    kind = "configuration"


class NumericalError(RepdensityError):
    """A numerical routine left its domain (failed downdate, drifted statistics)."""

    kind = "numerical"


class UnderflowError_(RepdensityError):
    """Removing an observation from an already-empty component."""

    kind = "underflow"


class UndefinedScoreError(RepdensityError):
    """Memorization score undefined for some examples."""

    kind = "undefined_score"

    def __init__(self, message, example_ids=()):
        super().__init__(message)
        self.example_ids = list(example_ids)


class EmptySubsetError(RepdensityError):
    """A requested subset selection produced no members."""

    kind = "empty_subset"
