"""Shared exception types.

Every fatal condition in the pipeline raises one of these, so the CLI can map
failure classes to distinct exit codes and the service can map them to HTTP
status codes.
"""


class MrpError(Exception):
    """Base class for all engine errors."""


class InputError(MrpError):
    """Malformed or missing input data (fatal validation failures)."""


class SpecError(MrpError):
    """Invalid model specification."""

    def __init__(self, message: str, field: str | None = None):
        super().__init__(message)
        self.field = field


class SamplingError(MrpError):
    """The sampler could not produce usable draws."""


class ArtifactError(MrpError):
    """A required upstream artifact is missing or unreadable."""
