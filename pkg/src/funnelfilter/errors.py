"""Exception types shared across the package."""


class BarrierError(ArithmeticError):
    """A control law was evaluated outside its admissible set.

    Raised by controller output functions when a gain denominator is not
    strictly positive. The integrator treats it as a step-rejection signal.
    """

    def __init__(self, reason, t=None):
        super().__init__(reason if t is None else f"{reason} at t={t!r}")
        self.reason = reason
        self.t = t


class StateError(RuntimeError):
    """Operator internal state does not cover the requested time."""


class ScenarioError(ValueError):
    """A scenario file failed to parse or validate."""
