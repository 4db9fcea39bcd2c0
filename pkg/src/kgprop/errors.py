"""Exception hierarchy shared across the package."""


class KgpropError(Exception):
    """Base class for all package errors."""


class ScenarioError(KgpropError):
    """Invalid scenario definition, parameters or sampled invariants."""


class AssumptionViolation(KgpropError):
    """Positive-mass or related operator assumption failed."""


class WindowExceeded(KgpropError):
    """A time outside the covered evolution window was requested."""


class ConfigError(KgpropError):
    """Malformed or incomplete run configuration."""
