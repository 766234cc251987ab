"""Exception types shared across the package.

Every error that can surface through the service or the CLI carries a stable
``code`` so clients can map failures to exit codes without parsing messages.
"""

from __future__ import annotations


class ZenoprepError(Exception):
    """Base class for all package errors."""

    code = "error"


class ConfigError(ZenoprepError):
    """Invalid configuration or arguments (rejected before any compute)."""

    code = "config"


class CapacityError(ZenoprepError):
    """Problem dimension exceeds the configured memory/size budget."""

    code = "capacity"


class ConvergenceError(ZenoprepError):
    """Iterative eigensolver failed to reach the requested residual."""

    code = "convergence"

    def __init__(self, message: str, best_residual: float | None = None):
        super().__init__(message)
        self.best_residual = best_residual


class DegenerateGroundStateError(ZenoprepError):
    """Ground state is degenerate within tolerance; instance is rejected."""

    code = "degeneracy"


class StepFloorError(ZenoprepError):
    """Refinement would split an interval below the minimum step width."""

    code = "step_floor"


class DivergentSeriesError(ZenoprepError):
    """Rewind cost diverges (zero fidelity step)."""

    code = "divergent"


class DegeneracyWarning(UserWarning):
    """Lattice shape is expected to produce symmetry degeneracies."""
