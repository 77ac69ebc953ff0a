"""Deterministic, splittable random streams for trajectory simulation.

Every stochastic ingredient of a trajectory — the Wiener process driving the
measurement back-action, the auxiliary noise that models imperfect detection,
spontaneous-emission jumps, and the random initial conditions — is drawn from
a counter-based generator (Philox) keyed by

    (base_seed, trajectory_index, attempt, stream_id)

so that trajectory ``i`` reproduces bit-exactly regardless of scheduling
order or how many other trajectories ran before it. The ``attempt`` index
increments when a trajectory is restarted after boundary loss, giving the
retry fresh but still reproducible noise.

Detection efficiency
--------------------
A homodyne detector with efficiency ``η`` sees only part of the noise that
drives the atom. With ``dW`` the full Wiener increment and ``dW_aux`` an
independent one,

    dW_η   = η·dW + √(η(1−η))·dW_aux      (measured, variance η·dt)
    dW_unm = dW − dW_η                     (unmeasured remainder)

The decomposition is exact by construction (``dW_η + dW_unm = dW`` holds
bitwise), and the true state can be evolved with the full ``dW`` while the
observer's photocurrent carries only ``dW_η``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError

__all__ = [
    "NoiseStream",
    "NoiseSplit",
    "JumpSample",
    "next_wiener",
    "split_measured",
    "sample_jump",
    "sample_recoil",
]


class NoiseStream:
    """One independent, reproducible variate stream.

    Parameters
    ----------
    base_seed:
        64-bit run seed shared by the whole ensemble.
    trajectory:
        Index of the trajectory this stream belongs to.
    attempt:
        Restart counter (0 for the first attempt).
    stream:
        Which role the stream plays; use the ``TRUTH``/``AUX``/``JUMP``/
        ``INIT`` constants so roles never collide.
    """

    #: conventional stream roles
    TRUTH, AUX, JUMP, INIT = range(4)

    def __init__(
        self,
        base_seed: int,
        trajectory: int = 0,
        attempt: int = 0,
        stream: int = 0,
    ):
        self.key = (int(base_seed), int(trajectory), int(attempt), int(stream))
        self._rng = np.random.Generator(
            np.random.Philox(np.random.SeedSequence(self.key))
        )

    def __repr__(self) -> str:  # pragma: no cover - debugging aid
        return f"NoiseStream{self.key}"

    def normal(self, size: int | tuple | None = None):
        """Standard normal variate(s)."""
        return self._rng.standard_normal(size)

    def uniform(self, low: float = 0.0, high: float = 1.0, size=None):
        """Uniform variate(s) on [low, high)."""
        return self._rng.uniform(low, high, size)


@dataclass(frozen=True)
class NoiseSplit:
    """Measured/unmeasured decomposition of one Wiener increment."""

    dW: float
    dW_eta: float
    dW_unm: float
    dW_aux: float


@dataclass(frozen=True)
class JumpSample:
    """Outcome of one spontaneous-emission jump test."""

    occurred: bool
    recoil: float | None  # scaled recoil momentum ũ ∈ [−k̃, k̃], if occurred


def next_wiener(stream: NoiseStream, dt: float, size=None):
    """Wiener increment(s): Gaussian with mean 0 and variance ``dt``."""
    if not dt > 0.0:
        raise ParameterError(f"dt must be > 0, got {dt!r}")
    return math.sqrt(dt) * stream.normal(size)


def split_measured(dW, dW_aux, eta: float) -> NoiseSplit:
    """Split a Wiener increment into measured and unmeasured parts.

    Works elementwise on arrays as well as on scalars. The identity
    ``dW_eta + dW_unm == dW`` holds bitwise for every draw: the measured
    part follows the formula, the unmeasured part is the rounded remainder,
    and the split's ``dW`` is their exact float sum. That recombined
    increment can differ from the raw input by rounding at the scale of the
    larger component (IEEE-754 makes an input-preserving exact decomposition
    impossible in general); at ``η = 1`` the split is the degenerate
    ``(dW, 0)`` and ``dW`` passes through bit-exactly.
    """
    if not 0.0 <= eta <= 1.0:
        raise ParameterError(f"eta must lie in [0, 1], got {eta!r}")
    if eta == 1.0:
        # degenerate split: the observer sees everything
        zero = dW - dW
        return NoiseSplit(dW=dW, dW_eta=dW, dW_unm=zero, dW_aux=dW_aux)
    dW_eta = eta * dW + math.sqrt(eta * (1.0 - eta)) * dW_aux
    dW_unm = dW - dW_eta
    return NoiseSplit(dW=dW_eta + dW_unm, dW_eta=dW_eta, dW_unm=dW_unm, dW_aux=dW_aux)


def sample_recoil(
    stream: NoiseStream, ktilde: float, distribution: str = "uniform"
) -> float:
    """Draw one scaled recoil momentum ``ũ ∈ [−k̃, k̃]``.

    ``distribution`` selects the projection of the fluorescence pattern onto
    the cavity axis: ``"uniform"`` (the default, simplest admissible choice)
    or ``"dipole"``, the σ-transition pattern ``f(u) ∝ 1 + (u/k̃)²``.
    """
    if ktilde <= 0.0:
        raise ParameterError(f"ktilde must be > 0, got {ktilde!r}")
    if distribution == "uniform":
        return float(stream.uniform(-ktilde, ktilde))
    if distribution == "dipole":
        # rejection sampling under the bound f(u) ≤ 3/4 on u ∈ [−1, 1]
        while True:
            u = float(stream.uniform(-1.0, 1.0))
            if float(stream.uniform(0.0, 0.75)) < 0.375 * (1.0 + u * u):
                return u * ktilde
    raise ParameterError(
        f"unknown recoil distribution {distribution!r}; "
        "expected 'uniform' or 'dipole'"
    )


def sample_jump(
    stream: NoiseStream,
    rate: float,
    dt: float,
    ktilde: float,
    distribution: str = "uniform",
) -> JumpSample:
    """Test for a spontaneous-emission jump during one substep.

    A jump occurs with probability ``rate·dt``; if it does, a recoil momentum
    is drawn from the projected fluorescence distribution. ``rate·dt`` must
    be small for the Bernoulli test to approximate a Poisson process; above
    0.1 a warning is emitted because jump statistics become unreliable.
    """
    if rate < 0.0:
        raise ParameterError(f"rate must be >= 0, got {rate!r}")
    if not dt > 0.0:
        raise ParameterError(f"dt must be > 0, got {dt!r}")
    p = rate * dt
    if p > 0.1:
        warnings.warn(
            f"jump probability per step rate*dt = {p:.3g} > 0.1; "
            "statistics unreliable, reduce the substep",
            stacklevel=2,
        )
    if p <= 0.0:
        return JumpSample(occurred=False, recoil=None)
    if float(stream.uniform()) >= p:
        return JumpSample(occurred=False, recoil=None)
    return JumpSample(
        occurred=True, recoil=sample_recoil(stream, ktilde, distribution)
    )
