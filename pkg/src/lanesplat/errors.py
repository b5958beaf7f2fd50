"""Exception taxonomy shared across the package."""


class LanesplatError(Exception):
    """Base class for all package errors."""


class DomainError(LanesplatError):
    """An argument is outside the operation's stated domain."""


class AlignmentError(LanesplatError):
    """Pose-set alignment is underdetermined or degenerate."""


class InitError(LanesplatError):
    """Scene initialization cannot proceed (empty cloud, bad depths, ...)."""


class StateError(LanesplatError):
    """Operation called out of order, e.g. backward without a forward pass."""


class ConfigError(LanesplatError):
    """Malformed or inconsistent configuration."""


class TrainAbortError(LanesplatError):
    """Training aborted (non-finite loss). Carries the offending view."""

    def __init__(self, message, iteration=None, view=None):
        super().__init__(message)
        self.iteration = iteration
        self.view = view
