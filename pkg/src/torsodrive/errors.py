"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Raised when parameters or profiles violate their invariants."""


class InputError(ValueError):
    """Raised when a runtime input is outside the operation's domain."""


class InsufficientDataError(InputError):
    """Raised when a recording is too short for the requested operation."""


class CalibrationError(RuntimeError):
    """Raised when a calibration recording cannot produce a profile."""


class PendulumFell(RuntimeError):
    """Raised when the coupling model leaves its valid domain (|theta| >= pi/2)."""

    def __init__(self, t: float, theta: float):
        self.t = t
        self.theta = theta
        super().__init__(f"pendulum left the model domain at t={t:.3f}s (theta={theta:.3f} rad)")


class AbortRun(RuntimeError):
    """Raised by the virtual driver when the vehicle is beyond recovery."""
