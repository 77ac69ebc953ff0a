"""Exception types used across the package.

The hierarchy keeps a single root (:class:`CavityCoolError`) so callers can
catch everything from the package at once, while each leaf also derives from
the matching builtin (``ValueError`` / ``RuntimeError``) so existing generic
handlers keep working.
"""

from __future__ import annotations


class CavityCoolError(Exception):
    """Root of the package exception hierarchy."""


class ParameterError(CavityCoolError, ValueError):
    """A physical or numerical parameter is invalid (non-positive rate,
    efficiency outside [0, 1], incommensurate grid, ...)."""


class ConfigError(ParameterError):
    """A run configuration is malformed: unknown keys, inconsistent
    timing (e.g. estimator tick not commensurate with the step), or
    out-of-range control settings."""


class EstimatorUndrivenError(ParameterError):
    """The measurement record carries no information (detection efficiency
    zero), so an innovation cannot be reconstructed from it."""


class EstimatorStateError(CavityCoolError, ValueError):
    """The Gaussian estimator state is unphysical where a physical one is
    required (e.g. non-positive phase-space area when computing purity)."""


class UndefinedParityError(CavityCoolError, ValueError):
    """The folded wavefunction has zero norm, so the reduced parity is
    undefined."""


class TrajectoryLost(CavityCoolError, RuntimeError):
    """More than half of the norm has been absorbed at the boundaries; the
    atom has effectively left the trap and the trajectory is discarded.

    Attributes
    ----------
    absorbed : float
        Cumulative absorbed norm at the moment the trajectory was abandoned.
    time : float or None
        Scaled time at which the loss threshold was crossed, if known.
    """

    def __init__(self, absorbed: float, time: float | None = None):
        where = f" at t = {time:.3f}" if time is not None else ""
        super().__init__(
            f"trajectory lost: absorbed norm {absorbed:.3f} over threshold{where}"
        )
        self.absorbed = absorbed
        self.time = time


class NumericalInstabilityError(CavityCoolError, RuntimeError):
    """The integrator shows signs of blowup (pre-renormalization norm moved
    beyond the configured guard tolerance in a single step)."""
