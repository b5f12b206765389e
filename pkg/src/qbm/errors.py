"""Exception types shared across the package.

Callers that hand us malformed values get :class:`InputError`; requests that
exceed a hard capability limit (e.g. enumerating a state space that is too
large) get :class:`CapabilityError` so the two failure modes stay
distinguishable in tests and CLI error handling.
"""


class QbmError(Exception):
    """Base class for all package errors."""


class InputError(QbmError, ValueError):
    """A caller-supplied value violates a documented precondition."""


class CapabilityError(QbmError):
    """The request is valid but exceeds a hard limit of the implementation."""


class UndefinedMetricError(QbmError):
    """The requested metric is undefined for the given inputs."""


class ModelFileError(QbmError):
    """Base class for model container problems."""


class CorruptModelFileError(ModelFileError):
    """The file is not a readable model container."""


class ModelFormatVersionError(ModelFileError):
    """The container's format version is not supported by this code."""
