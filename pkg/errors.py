"""
Error types shared by the simulator modules.
Each error carries the process exit code the command line reports for it.
"""


class AdderError(Exception):
    """Base class for every failure raised by the simulator."""

    exit_code = 1


class DomainError(AdderError, ValueError):
    """An argument lies outside the domain of the operation."""

    exit_code = 1


class ContractViolation(AdderError, ValueError):
    """A pre-condition of the operation does not hold (e.g. length mismatch)."""

    exit_code = 1


class ResourceCapExceeded(AdderError):
    """The requested run exceeds a configured resource cap."""

    exit_code = 3


class DegenerateAmplitudeError(AdderError):
    """An amplitude is too small for its phase to be defined."""

    exit_code = 2


class InvariantFailure(AdderError):
    """A verification check failed."""

    exit_code = 2
