"""Stochastic wavefunction evolution of the measured atom (adiabatic model).

After adiabatic elimination of the cavity field and the internal atomic
state, the atom moves in the effective lattice ``H = πP² − V_max cos²(k̃X)``
while the homodyne measurement continuously localizes it. The conditioned
pure state obeys the stochastic Schrödinger equation

    dψ = −iHψ dt − (Γ/4) w² ψ dt − √(Γ/2) w ψ dW,
    w := cos(2k̃X) − ⟨cos(2k̃X)⟩,

(plus c-number terms removed here by explicit renormalization). The engine
integrates it by operator splitting on a periodic spatial grid:

* potential + measurement substeps over the first half step, applied in the
  position basis as the *exact* exponential of the frozen-coefficient
  linear SDE — ``exp(+i f V_max cos²(k̃x) dt_s)`` for the potential and
  ``exp(−(Γ_f/2) w² dt_s − √(Γ_f/2) w ΔW_s)`` for the measurement (the
  −Γ_f/2 in the drift is the Itô-to-pathwise correction, making the
  substep Milstein-exact given the frozen expectation);
* one spectral kinetic application ``exp(−iπP²Δt)`` in the middle;
* the remaining substeps over the second half.

The amplitude is renormalized after every substep. The control factor ``f``
scales both the lattice depth and the measurement strength, because both
are set by the intracavity intensity.

Trajectories that wander to the grid boundary are soaked up by a smooth
imaginary absorber in the outer half of each boundary well; a trajectory
whose cumulative absorbed norm passes the loss threshold raises
``TrajectoryLost`` and is restarted by the caller with a fresh seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from types import SimpleNamespace

import numpy as np

from .errors import NumericalInstabilityError, ParameterError, TrajectoryLost
from .model import ScaledParams, effective_energy

__all__ = [
    "Grid",
    "Wavefunction",
    "Moments",
    "PhotoRecord",
    "StepResult",
    "AdiabaticEngine",
    "make_grid",
    "init_coherent",
    "compute_moments",
    "mean_sin_sq",
    "photocurrent",
    "draw_ring_ic",
    "draw_uniform_ic",
]


@dataclass(frozen=True, eq=False)
class Grid:
    """Periodic spatial grid spanning exactly ``wells`` lattice wells.

    The grid is the shared discretization for the adiabatic engine, the
    full-model engine, and the band/parity analysis; the analysis folding
    requires an even integer number of points per well.
    """

    n: int
    wells: int
    ktilde: float
    x: np.ndarray
    dx: float
    p: np.ndarray

    @property
    def points_per_well(self) -> int:
        return self.n // self.wells

    @property
    def half_width(self) -> float:
        """Domain edge: the grid covers [−half_width, half_width)."""
        return 0.5 * self.wells * math.pi / self.ktilde


def make_grid(n: int, wells: int, ktilde: float) -> Grid:
    """Build a grid of ``n`` points over ``wells`` wells of period π/k̃."""
    if n <= 0 or n & (n - 1) != 0:
        raise ParameterError(f"grid size must be a power of two, got {n!r}")
    if wells <= 0 or n % wells != 0:
        raise ParameterError(
            f"grid size {n} must be an integer multiple of wells={wells!r}"
        )
    if (n // wells) % 2 != 0:
        raise ParameterError(
            f"points per well must be even, got {n}/{wells} = {n // wells}"
        )
    if ktilde <= 0.0:
        raise ParameterError(f"ktilde must be positive, got {ktilde!r}")
    length = wells * math.pi / ktilde
    dx = length / n
    x = (np.arange(n) - n // 2) * dx
    p = 2.0 * math.pi * np.fft.fftfreq(n, d=dx)
    return Grid(n=n, wells=wells, ktilde=ktilde, x=x, dx=dx, p=p)


@dataclass
class Wavefunction:
    """Complex amplitudes on the grid plus the cumulative absorbed norm."""

    psi: np.ndarray
    absorbed: float = 0.0


@dataclass(frozen=True)
class Moments:
    """Moments of the motional state (true-state counterpart of the
    Gaussian estimate), all in scaled units."""

    x: float
    p: float
    vx: float
    vp: float
    cov: float
    cos2k: float
    cossq: float
    energy: float


@dataclass
class PhotoRecord:
    """Photocurrent increments Δr̃, one per estimator interval Δt_G."""

    dt_g: float
    increments: list[float] = field(default_factory=list)

    def append(self, dr: float) -> None:
        self.increments.append(dr)

    def __len__(self) -> int:
        return len(self.increments)


@dataclass(frozen=True)
class StepResult:
    """Outputs of one full SSE step needed to build the photocurrent.

    ``sub_dw`` and ``sub_cossq`` resolve the step's noise increments and
    ⟨cos²(k̃X)⟩ values per measurement substep, so the caller can bucket
    them into estimator intervals shorter than Δt. Full moments are only
    attached when requested — they cost an extra pair of transforms.
    """

    dw: float
    cossq_mean: float
    sub_dw: np.ndarray
    sub_cossq: np.ndarray
    moments: "Moments | None" = None


def init_coherent(
    grid: Grid, x0: float, p0: float, vx: float, vp: float
) -> Wavefunction:
    """A chirp-free Gaussian packet with the requested first moments.

    Only minimum-uncertainty pairs are representable without a chirp, so
    ``vx·vp = 1/4`` is required; the canonical choice is V_x = V_p = 1/2.
    The packet must sit at least 3σ from the domain edge.
    """
    if vx <= 0.0 or vp <= 0.0:
        raise ParameterError(
            f"variances must be positive, got vx={vx!r}, vp={vp!r}"
        )
    if abs(4.0 * vx * vp - 1.0) > 1e-9:
        raise ParameterError(
            "init_coherent builds a chirp-free minimum-uncertainty packet, "
            f"which requires vx*vp = 1/4; got vx*vp = {vx * vp!r}"
        )
    sigma = math.sqrt(vx)
    if abs(x0) + 3.0 * sigma > grid.half_width:
        raise ParameterError(
            f"packet at x0={x0!r} with sigma={sigma:.3g} is within 3 sigma "
            f"of the domain edge ±{grid.half_width:.3g}"
        )
    u = grid.x - x0
    psi = np.exp(-u * u / (4.0 * vx) + 1j * p0 * grid.x)
    psi /= math.sqrt(np.sum(np.abs(psi) ** 2) * grid.dx)
    return Wavefunction(psi=psi.astype(np.complex128))


def compute_moments(
    grid: Grid, wf: "Wavefunction | np.ndarray", vmax: float
) -> Moments:
    """All recorded moments of the state, including E_eff.

    ``wf`` may be a :class:`Wavefunction` or a bare complex array.
    ``vmax`` is the *nominal* lattice depth: effective energy is always
    reported against the unmodulated potential, so that the feedback's
    switching does not masquerade as energy jumps.
    """
    psi = np.asarray(getattr(wf, "psi", wf))
    weight = (psi.real**2 + psi.imag**2) * grid.dx
    norm = float(np.sum(weight))
    weight /= norm

    xm = float(np.dot(weight, grid.x))
    vx = float(np.dot(weight, (grid.x - xm) ** 2))
    two_kx = 2.0 * grid.ktilde * grid.x
    cos2k = float(np.dot(weight, np.cos(two_kx)))
    cossq = 0.5 * (1.0 + cos2k)

    psi_k = np.fft.fft(psi)
    wk = psi_k.real**2 + psi_k.imag**2
    wk /= np.sum(wk)
    pm = float(np.dot(wk, grid.p))
    vp = float(np.dot(wk, (grid.p - pm) ** 2))

    # symmetrized covariance: Re⟨X P⟩ − ⟨X⟩⟨P⟩ with P applied spectrally
    p_psi = np.fft.ifft(grid.p * psi_k)
    xp = float(np.real(np.sum(np.conj(psi) * grid.x * p_psi)) * grid.dx / norm)
    cov = xp - xm * pm

    energy = effective_energy(
        SimpleNamespace(p=pm, vp=vp, cossq=cossq), vmax
    )
    return Moments(
        x=xm, p=pm, vx=vx, vp=vp, cov=cov,
        cos2k=cos2k, cossq=cossq, energy=energy,
    )


def mean_sin_sq(
    grid: Grid, wf: "Wavefunction | np.ndarray", ktilde: float
) -> float:
    """⟨sin²(2k̃X)⟩ — the state moment in the measurement heating rate."""
    weight = np.abs(np.asarray(getattr(wf, "psi", wf))) ** 2 * grid.dx
    value = float(np.dot(weight, np.sin(2.0 * ktilde * grid.x) ** 2))
    return value / float(np.sum(weight))


def photocurrent(
    moments, gamma_t: float, eta: float, dw_eta: float, dt: float
) -> float:
    """One photocurrent increment: Δr̃ = −√(8η²Γ_t)·⟨cos²(k̃X)⟩·Δt + ΔW_η.

    ``moments`` may be a Moments record or a bare ⟨cos²(k̃X)⟩ value (e.g.
    the substep-averaged value from a StepResult).
    """
    cossq = moments.cossq if hasattr(moments, "cossq") else float(moments)
    return -math.sqrt(8.0 * eta * eta * gamma_t) * cossq * dt + dw_eta


def draw_ring_ic(stream, radius: float = 6.0) -> tuple[float, float]:
    """Draw (x0, p0) uniformly on the phase-space ring through (x=6, p=0).

    Near the well bottom the scaled Hamiltonian is π(P² + X²), so circles
    in the (X, P) plane are the harmonic energy contours; the ring is the
    circle of the given radius, sampled uniform in angle.
    """
    if radius <= 0.0:
        raise ParameterError(f"ring radius must be positive, got {radius!r}")
    theta = float(stream.uniform(0.0, 2.0 * math.pi))
    return radius * math.cos(theta), radius * math.sin(theta)


def draw_uniform_ic(stream, ktilde: float) -> tuple[float, float]:
    """Draw a stationary packet position uniform over one well period."""
    half = 0.5 * math.pi / ktilde
    return float(stream.uniform(-half, half)), 0.0


class AdiabaticEngine:
    """Precomputed split-step integrator for one (grid, params, Δt) choice.

    The engine holds everything that does not change between steps: the
    lattice profiles, the kinetic phase, the boundary absorber, and a small
    cache of potential phase factors per control level.
    """

    def __init__(
        self,
        grid: Grid,
        params: ScaledParams,
        dt: float = 5e-4,
        *,
        substeps_per_half: int = 4,
        absorber_strength: float = 80.0,
        norm_tol: float = 0.05,
        loss_threshold: float = 0.5,
    ):
        if dt <= 0.0:
            raise ParameterError(f"dt must be positive, got {dt!r}")
        if substeps_per_half < 1:
            raise ParameterError(
                f"substeps_per_half must be >= 1, got {substeps_per_half!r}"
            )
        self.grid = grid
        self.params = params
        self.dt = dt
        self.substeps_per_half = substeps_per_half
        self.n_sub = 2 * substeps_per_half
        self.dt_sub = dt / self.n_sub
        self.norm_tol = norm_tol
        self.loss_threshold = loss_threshold

        k = params.ktilde
        self._cos2k = np.cos(2.0 * k * grid.x)
        self._cos2k_sq = self._cos2k**2
        self._cos_sq = 0.5 * (1.0 + self._cos2k)
        self._kinetic_phase = np.exp(-1j * math.pi * grid.p**2 * dt)
        self._phase_cache: dict[float, np.ndarray] = {}

        # raised-cosine absorber over the outer half of each boundary well
        zone = 0.5 * math.pi / k
        inner = grid.half_width - zone
        s = np.clip((np.abs(grid.x) - inner) / zone, 0.0, 1.0)
        ramp = np.sin(0.5 * math.pi * s) ** 2
        self.absorber_strength = absorber_strength
        self._absorber_decay = np.exp(-absorber_strength * ramp * dt)
        self._absorber_active = ramp > 0.0

    def potential_phase(self, factor: float) -> np.ndarray:
        """exp(+i·f·V_max·cos²(k̃x)·dt_sub), cached per control factor."""
        cached = self._phase_cache.get(factor)
        if cached is None:
            cached = np.exp(
                1j * factor * self.params.vmax * self._cos_sq * self.dt_sub
            )
            if len(self._phase_cache) < 16:
                self._phase_cache[factor] = cached
        return cached

    def _normalize(self, psi: np.ndarray) -> None:
        norm_sq = (
            float(np.dot(psi.real, psi.real) + np.dot(psi.imag, psi.imag))
            * self.grid.dx
        )
        if abs(norm_sq - 1.0) > self.norm_tol:
            raise NumericalInstabilityError(
                f"norm² drifted to {norm_sq!r} within one substep "
                f"(tolerance {self.norm_tol}); reduce dt"
            )
        psi *= 1.0 / math.sqrt(norm_sq)

    def sse_step(
        self, wf: Wavefunction, factor: float, stream,
        *, with_moments: bool = False,
    ) -> StepResult:
        """Advance one full Δt under control factor ``factor``.

        Returns the step's total Wiener increment together with the
        per-substep increments and ⟨cos²(k̃X)⟩ values for photocurrent
        construction (plus full moments when ``with_moments`` is set).
        The wavefunction is renormalized after every substep; a
        pre-renormalization norm excursion beyond ``norm_tol`` raises
        ``NumericalInstabilityError``.
        """
        if factor <= 0.0:
            raise ParameterError(
                f"control factor must be positive, got {factor!r}"
            )
        psi = wf.psi
        gamma_f = factor * self.params.Gamma
        phase = self.potential_phase(factor)
        half_gamma_dt = 0.5 * gamma_f * self.dt_sub
        root_half_gamma = math.sqrt(0.5 * gamma_f)
        root_two_gamma = math.sqrt(2.0 * gamma_f)
        dx = self.grid.dx

        sub_dw = stream.normal(size=self.n_sub) * math.sqrt(self.dt_sub)
        sub_cossq = np.empty(self.n_sub)

        half = self.substeps_per_half
        for i in range(self.n_sub):
            if i == half:
                psi_k = np.fft.fft(psi)
                psi_k *= self._kinetic_phase
                psi = np.fft.ifft(psi_k)
            weight = psi.real * psi.real + psi.imag * psi.imag
            mean_cos = float(np.dot(weight, self._cos2k)) * dx
            var_cos = float(np.dot(weight, self._cos2k_sq)) * dx - mean_cos**2
            sub_cossq[i] = 0.5 * (1.0 + mean_cos)
            # midpoint mean: ⟨cos 2k̃X⟩ moves by −√(2Γ)Var·dW within the
            # substep; centering w on the midpoint value supplies the
            # Milstein functional term the frozen mean would miss
            mean_mid = mean_cos - 0.5 * root_two_gamma * var_cos * sub_dw[i]
            w = self._cos2k - mean_mid
            psi *= phase
            psi *= np.exp(
                -half_gamma_dt * w * w - root_half_gamma * sub_dw[i] * w
            )
            self._normalize(psi)
        wf.psi = psi
        return StepResult(
            dw=float(np.sum(sub_dw)),
            cossq_mean=float(np.mean(sub_cossq)),
            sub_dw=sub_dw,
            sub_cossq=sub_cossq,
            moments=self.moments(wf) if with_moments else None,
        )

    def apply_absorber(self, wf: Wavefunction, t: float | None = None) -> float:
        """Damp amplitude in the boundary zones; returns the norm absorbed.

        The cumulative absorbed norm accumulates on the wavefunction;
        crossing the loss threshold raises ``TrajectoryLost``.
        """
        psi = wf.psi
        psi *= self._absorber_decay
        norm_sq = (
            float(np.dot(psi.real, psi.real) + np.dot(psi.imag, psi.imag))
            * self.grid.dx
        )
        absorbed = max(0.0, 1.0 - norm_sq)
        # accumulate on the retained-norm scale so the total is a fraction
        wf.absorbed = 1.0 - (1.0 - wf.absorbed) * (1.0 - absorbed)
        psi *= 1.0 / math.sqrt(norm_sq)
        if wf.absorbed > self.loss_threshold:
            raise TrajectoryLost(wf.absorbed, t)
        return absorbed

    def moments(self, wf: Wavefunction) -> Moments:
        """Moments against the nominal (unmodulated) potential."""
        return compute_moments(self.grid, wf, self.params.vmax)
