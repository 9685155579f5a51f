"""Exception hierarchy. The CLI maps each class to its own exit status."""


class NoisyDRError(Exception):
    """Base class for all package errors."""


class ParameterError(NoisyDRError, ValueError):
    """An argument is out of its legal range or shapes disagree."""


class DataError(NoisyDRError, ValueError):
    """Input numbers are unusable (non-finite, not normalised, ...)."""


class IngestionError(NoisyDRError):
    """A file could not be read or parsed."""


class RunError(NoisyDRError, RuntimeError):
    """An optimisation diverged."""

    def __init__(self, message, iteration=None):
        super().__init__(message)
        self.iteration = iteration
