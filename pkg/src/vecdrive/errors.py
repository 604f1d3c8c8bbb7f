"""Exception types shared across the simulator."""


class ConfigError(ValueError):
    """Invalid parameter or scenario configuration."""

    def __init__(self, message: str, field: str | None = None):
        self.field = field
        super().__init__(f"{field}: {message}" if field else message)


class SimulationError(RuntimeError):
    """Numerical failure (non-finite state) during a simulation."""

    def __init__(self, message: str, t: float | None = None):
        self.t = t
        super().__init__(f"{message} at t={t:.9g} s" if t is not None else message)


class IncompleteWindowError(RuntimeError):
    """A switching-frequency window was queried before it was complete."""
