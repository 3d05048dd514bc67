"""Exception types raised by the simulator."""


class SimulationError(Exception):
    """Base class for runtime failures of the simulator."""


class DegenerateSteadyStateError(SimulationError):
    """The Liouvillian kernel is not one-dimensional (or the solve is singular)."""


class PositivityError(SimulationError):
    """A density matrix developed an eigenvalue below the allowed tolerance."""

    def __init__(self, message, time=None):
        super().__init__(message)
        self.time = time


class TruncationError(SimulationError):
    """Truncation-convergence loop exhausted the allowed level budget."""


class SamplingError(SimulationError):
    """Requested time grid cannot resolve the expected oscillation."""


class FitError(SimulationError):
    """A curve fit required by an experiment did not converge."""
