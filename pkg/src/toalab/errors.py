"""Exception types raised across the package."""


class ToaError(Exception):
    """Base class for all package errors."""


class InputError(ToaError, ValueError):
    """Invalid argument value."""


class RepresentationError(ToaError, ValueError):
    """A wave function was passed in the wrong representation."""


class ResolutionError(ToaError):
    """The grid cannot represent the requested object to the required accuracy."""


class NumericalBlowupError(ToaError, FloatingPointError):
    """Non-finite amplitudes appeared during propagation."""


class WindowError(ToaError, ValueError):
    """A shift or probe falls outside the available axis window."""


class UndefinedArrivalError(ToaError, ValueError):
    """Arrival time is undefined (zero momentum)."""


class NodeProximityError(ToaError):
    """A Bohmian trajectory entered a near-node region of the wave function."""


class ConfigError(ToaError, ValueError):
    """Invalid or unknown configuration entry."""
