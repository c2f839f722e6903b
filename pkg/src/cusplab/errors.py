"""Exception types shared across the package."""


class CusplabError(Exception):
    """Base class for all package errors."""


class ContractViolationError(CusplabError):
    """An argument violates a documented precondition (e.g. dimension mismatch)."""


class SingularPointError(CusplabError):
    """Evaluation was requested exactly on a singular point of the integrand."""


class UnsupportedModelError(CusplabError):
    """The requested quantity is not defined for this model variant."""


class IntegrationFailureError(CusplabError):
    """A quadrature did not converge to the requested tolerance."""


class EvaluationError(CusplabError):
    """An integrand returned a non-finite value at a quadrature node."""


class ConfigError(CusplabError):
    """A run configuration file is malformed or inconsistent."""
