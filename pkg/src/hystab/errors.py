"""Exception types raised across the package."""


class HystabError(Exception):
    """Base class for all package errors."""


class SingularAtS(HystabError):
    """``sI - A`` is numerically singular at the requested point."""


class EigFailure(HystabError):
    """Eigenvalue iteration did not converge."""


class NonFiniteInput(HystabError, ValueError):
    pass


class InconsistentInitialState(HystabError, ValueError):
    """Initial operator output is not reachable from the given input."""


class NoOverlap(HystabError, ValueError):
    pass


class OpenPath(HystabError, ValueError):
    pass


class InvalidSector(HystabError, ValueError):
    pass


class NonFiniteState(HystabError):
    """State exceeded the blow-up bound during integration."""


class ConfigError(HystabError, ValueError):
    """Scenario configuration could not be parsed."""


class ModelError(HystabError, ValueError):
    """Model dimensions or values are inconsistent."""
