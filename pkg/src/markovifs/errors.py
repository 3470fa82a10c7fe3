"""Exception hierarchy shared by the library and the CLI.

Each class carries the process exit code the CLI reports for it.
"""


class MarkovIfsError(Exception):
    exit_code = 5

    def __init__(self, message, **details):
        super().__init__(message)
        self.details = details

    def to_dict(self):
        return {"error": type(self).__name__, "message": str(self), "details": self.details}


class DomainError(MarkovIfsError, ValueError):
    """Argument outside the domain of an operation (bad symbol, point off the map domain)."""

    exit_code = 3


class InstanceError(MarkovIfsError, ValueError):
    """Invalid instance document or inconsistent model."""

    exit_code = 3


class GuardError(MarkovIfsError, RuntimeError):
    """A resource or resolution guard refused the request."""

    exit_code = 4


class GeometryError(MarkovIfsError, ValueError):
    """Voxel sets with incompatible geometry, or an empty set where one is required."""

    exit_code = 4


class CertificationError(MarkovIfsError):
    """A declared Lipschitz bound was contradicted by sampling."""

    exit_code = 5


class InvariantError(MarkovIfsError, RuntimeError):
    exit_code = 5
