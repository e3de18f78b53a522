"""Exception types shared by the solver, fitting and I/O layers."""
from __future__ import annotations

__all__ = ["NanopairsError", "DiscretizationError", "ConvergenceError", "FitError", "ParseError"]


class NanopairsError(Exception):
    """Base class for package errors."""


class DiscretizationError(NanopairsError, ValueError):
    """Lattice spacing too coarse for the material, or the shape is unresolved."""

    def __init__(self, message: str, max_spacing: float | None = None):
        super().__init__(message)
        self.max_spacing = max_spacing


class ConvergenceError(NanopairsError, RuntimeError):
    """Iterative solve stopped above its tolerance."""

    def __init__(self, message: str, residual: float, iterations: int = 0, wavelength: float | None = None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations
        self.wavelength = wavelength


class FitError(NanopairsError, RuntimeError):
    """A least-squares fit could not be set up or did not converge."""

    def __init__(self, message: str, residual: float | None = None):
        super().__init__(message)
        self.residual = residual


class ParseError(NanopairsError, ValueError):
    """Malformed input file; ``offset`` is the byte (or line) position of the fault."""

    def __init__(self, message: str, offset: int | None = None):
        super().__init__(message)
        self.offset = offset
