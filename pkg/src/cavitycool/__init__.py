"""Quantum-trajectory simulation and real-time feedback control of a single
atom cooled by the light field of a driven optical cavity.

The package provides, bottom to top:

* :mod:`cavitycool.model` — parameter records, physical↔scaled unit
  conversion, and all closed-form theory (heating rates, cooling limits,
  squeezing factors).
* :mod:`cavitycool.noise` — deterministic, splittable random streams:
  Wiener increments, the measured/unmeasured split at finite detection
  efficiency, and spontaneous-emission jump sampling.
* :mod:`cavitycool.sim_adiabatic` — stochastic wavefunction evolution of
  the measured atom after adiabatic elimination of cavity and internal
  state, on a spectral grid with absorbing boundaries.
* :mod:`cavitycool.estimator` — the approximate Gaussian estimator driven
  by the homodyne photocurrent (reference form and the fast reduced form).
* :mod:`cavitycool.controller` — the sliding-window quadratic fit and the
  bang-bang switching policies.
* :mod:`cavitycool.sim_full` — the full atom + cavity + internal-state
  stochastic evolution used to validate the adiabatic model.
* :mod:`cavitycool.analysis` — band structure, band populations, reduced
  parity, and ensemble statistics.
* :mod:`cavitycool.runner` / :mod:`cavitycool.cli` — the closed feedback
  loop, trajectory records, and the command-line front end.
"""

from .errors import (
    CavityCoolError,
    ConfigError,
    EstimatorStateError,
    EstimatorUndrivenError,
    NumericalInstabilityError,
    ParameterError,
    TrajectoryLost,
    UndefinedParityError,
)
from .model import (
    ControlLevel,
    CoolingLimits,
    PhysicalParams,
    ScaledParams,
    SqueezeFactors,
    cooling_limits,
    derive_scaled,
    effective_energy,
    heating_rate_general,
    heating_rate_lowtemp,
    heating_rate_uniform,
    squeeze_factors,
    to_physical,
)
from .controller import (
    ControllerState,
    FeedbackPolicy,
    QuadFitState,
    controller_tick,
    decide_direct,
    decide_improved,
    decide_simple,
    quadfit_push,
    quadfit_slope,
    stagger_combine,
    y_est,
)
from .analysis import (
    BandBasis,
    EnsembleStats,
    ParityReport,
    ParitySeries,
    band_basis,
    band_populations,
    ensemble_stats,
    parity_product_series,
    parity_report,
    reduced_parity,
)
from .estimator import (
    FastEstimate,
    GaussianEstimate,
    check_and_reset,
    initial_estimate,
    purity,
    reconstruct_dwe,
    step_fast,
    step_reference,
    to_fast,
    to_reference,
)
from .noise import (
    JumpSample,
    NoiseSplit,
    NoiseStream,
    next_wiener,
    sample_jump,
    sample_recoil,
    split_measured,
)
from .sim_adiabatic import (
    AdiabaticEngine,
    Grid,
    Moments,
    PhotoRecord,
    StepResult,
    Wavefunction,
    compute_moments,
    draw_ring_ic,
    draw_uniform_ic,
    init_coherent,
    make_grid,
    mean_sin_sq,
    photocurrent,
)

__version__ = "0.1.0"

__all__ = [
    "CavityCoolError",
    "ConfigError",
    "EstimatorStateError",
    "EstimatorUndrivenError",
    "NumericalInstabilityError",
    "ParameterError",
    "TrajectoryLost",
    "UndefinedParityError",
    "ControlLevel",
    "CoolingLimits",
    "PhysicalParams",
    "ScaledParams",
    "SqueezeFactors",
    "cooling_limits",
    "derive_scaled",
    "effective_energy",
    "heating_rate_general",
    "heating_rate_lowtemp",
    "heating_rate_uniform",
    "squeeze_factors",
    "to_physical",
    "ControllerState",
    "FeedbackPolicy",
    "QuadFitState",
    "controller_tick",
    "decide_direct",
    "decide_improved",
    "decide_simple",
    "quadfit_push",
    "quadfit_slope",
    "stagger_combine",
    "y_est",
    "FastEstimate",
    "GaussianEstimate",
    "check_and_reset",
    "initial_estimate",
    "purity",
    "reconstruct_dwe",
    "step_fast",
    "step_reference",
    "to_fast",
    "to_reference",
    "BandBasis",
    "EnsembleStats",
    "ParityReport",
    "ParitySeries",
    "band_basis",
    "band_populations",
    "ensemble_stats",
    "parity_product_series",
    "parity_report",
    "reduced_parity",
    "JumpSample",
    "NoiseSplit",
    "NoiseStream",
    "next_wiener",
    "sample_jump",
    "sample_recoil",
    "split_measured",
    "AdiabaticEngine",
    "Grid",
    "Moments",
    "PhotoRecord",
    "StepResult",
    "Wavefunction",
    "compute_moments",
    "draw_ring_ic",
    "draw_uniform_ic",
    "init_coherent",
    "make_grid",
    "mean_sin_sq",
    "photocurrent",
    "__version__",
]
