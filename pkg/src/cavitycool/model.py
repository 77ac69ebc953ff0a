"""Physical model, unit scaling, and closed-form theory.

The system is a two-level atom of mass ``m`` moving along the axis of a
coherently driven, high-finesse optical cavity. The drive laser is detuned
``Δ`` to the red of the atomic transition, so the intracavity standing wave
forms a trapping optical lattice, and the light leaking through the output
mirror is monitored by homodyne detection. For large detuning both the
internal atomic state and the cavity mode follow the slow atomic motion, and
the motion reduces to one dimension along the cavity axis with

* an effective potential ``−V_max cos²(k̃ X)``, and
* a continuous position measurement of the observable ``cos²(k̃ X)`` with
  strength ``Γ``, whose record is the homodyne photocurrent.

Scaled units
------------
Near a well bottom the potential is harmonic with angular frequency
``ω_HO = α g k √(2ħ/(m Δ))``. Times are measured in units of the harmonic
period ``T = 2π/ω_HO``, lengths in units of the ground-state width
``w_x = √(ħ/(m ω_HO))``, and momenta in ``w_p = ħ/w_x`` (so that
``[X, P] = i``).  Dimensionless parameters:

=========  =====================================================
``k̃``      ``k·w_x`` — optical wavenumber in trap-width units
``V_max``  ``π/k̃²`` — lattice depth (not an independent knob)
``Γ``      ``2α²g̃⁴/(Δ̃²κ̃)`` — effective measurement strength
``γ̃ κ̃ Δ̃ g̃``  the corresponding rates multiplied by ``T``
=========  =====================================================

The scaled effective Hamiltonian is ``H_eff = πP² − V_max cos²(k̃X)``, and
the motional energy is reported relative to the potential minimum,
``E_eff = π⟨P²⟩ + V_max(1 − ⟨cos²(k̃X)⟩)``.

This module holds the parameter records, the physical↔scaled conversion, and
every closed-form result used elsewhere: measurement heating rates, feedback
cooling limits and the controllability borders, and the single-switch
squeezing factors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import TYPE_CHECKING

from .errors import ParameterError

if TYPE_CHECKING:  # pragma: no cover - import for type checkers only
    from .sim_adiabatic import Moments

__all__ = [
    "HBAR",
    "SPEED_OF_LIGHT",
    "PhysicalParams",
    "ScaledParams",
    "ControlLevel",
    "CoolingLimits",
    "SqueezeFactors",
    "derive_scaled",
    "to_physical",
    "measurement_strength",
    "effective_energy",
    "heating_rate_uniform",
    "heating_rate_lowtemp",
    "heating_rate_general",
    "cooling_limits",
    "squeeze_factors",
]

HBAR = 1.054571817e-34
"""Reduced Planck constant (J·s)."""

SPEED_OF_LIGHT = 299792458.0
"""Speed of light in vacuum (m/s, exact)."""

# Ground state energy of the harmonic well in scaled units (ħω_HO/2 → π·1/2
# kinetic + π/2·... : H_eff ≈ πP² + πX² − V_max near a bottom, so E₀ = π and
# the first excited level is E₁ = 3π).
_E0_HARMONIC = math.pi
_E1_HARMONIC = 3.0 * math.pi


@dataclass(frozen=True)
class PhysicalParams:
    """Laboratory-frame parameters in SI units (angular rates in rad/s).

    ``detuning`` is the red detuning ``Δ = ω_A − ω_L > 0`` of the drive laser
    below the atomic transition ``ω_A``; ``wavenumber`` is the laser
    wavenumber ``k = ω_L/c``, which must be consistent with
    ``ω_A = c·k + Δ``.
    """

    mass: float           # atomic mass (kg)
    omega_atom: float     # atomic transition frequency ω_A (rad/s)
    gamma: float          # atomic energy decay rate γ (rad/s)
    kappa: float          # cavity energy decay rate κ (rad/s)
    g: float              # atom-cavity coupling g (rad/s)
    detuning: float       # red detuning Δ (rad/s), > 0
    alpha: float          # mean intracavity field amplitude (√photons)
    wavenumber: float     # laser wavenumber k (1/m)

    @classmethod
    def cesium_d2(
        cls,
        *,
        alpha: float = 1.0,
        detuning: float = 2.0 * math.pi * 4.0e9,
    ) -> "PhysicalParams":
        """Canonical cesium D2 cavity-QED parameter set.

        ``m = 2.21e-25 kg``, transition at ``ω_A/2π = 351.7 THz``,
        free-space linewidth ``γ/2π = 5.2 MHz``, cavity ``κ/2π = 40 MHz``,
        coupling ``g/2π = 120 MHz``, red detuning ``Δ/2π = 4 GHz`` by
        default, and one intracavity photon on average.
        """
        omega_atom = 2.0 * math.pi * 351.7e12
        return cls(
            mass=2.21e-25,
            omega_atom=omega_atom,
            gamma=2.0 * math.pi * 5.2e6,
            kappa=2.0 * math.pi * 40.0e6,
            g=2.0 * math.pi * 120.0e6,
            detuning=detuning,
            alpha=alpha,
            wavenumber=(omega_atom - detuning) / SPEED_OF_LIGHT,
        )


@dataclass(frozen=True)
class ScaledParams:
    """Dimensionless parameters of the scaled model plus the unit anchors.

    ``time_unit`` (seconds per scaled time unit, ``2π/ω_HO``) and
    ``length_unit`` (metres per scaled length, ``w_x``) allow exact
    conversion back to laboratory units via :func:`to_physical`.

    A *consistent* instance satisfies the identities
    ``g̃ = √(πΔ̃)/(αk̃)`` and ``Γ = 2α²g̃⁴/(Δ̃²κ̃)``; both constructors
    (:func:`derive_scaled` and :meth:`canonical`) guarantee them.
    ``V_max = π/k̃²`` is exposed as a property so it can never drift from
    its defining identity.
    """

    ktilde: float        # k̃ — optical wavenumber in trap-width units
    Gamma: float         # Γ — effective measurement strength
    eta: float = 1.0     # η — homodyne detection efficiency ∈ [0, 1]
    epsilon1: float = 0.1  # ε₁ — upward bang amplitude
    epsilon2: float = 0.1  # ε₂ — downward bang amplitude
    gamma_t: float = 0.0   # γ̃ — scaled atomic decay rate
    kappa_t: float = 0.0   # κ̃ — scaled cavity decay rate
    delta_t: float = 0.0   # Δ̃ — scaled detuning
    g_t: float = 0.0       # g̃ — scaled coupling
    alpha: float = 1.0     # α — mean intracavity amplitude
    time_unit: float = 0.0    # seconds per scaled time unit (2π/ω_HO)
    length_unit: float = 0.0  # metres per scaled length unit (w_x)

    @property
    def vmax(self) -> float:
        """Lattice depth ``V_max = π/k̃²`` (identity, not a free knob)."""
        return math.pi / self.ktilde**2

    @property
    def well_period(self) -> float:
        """Spatial period of the optical potential, ``π/k̃``."""
        return math.pi / self.ktilde

    @property
    def momentum_unit(self) -> float:
        """kg·m/s per scaled momentum unit, ``w_p = ħ/w_x``."""
        return HBAR / self.length_unit

    @property
    def drive(self) -> float:
        """Scaled cavity drive amplitude ``Ẽ = ακ̃/2`` (the value that
        sustains a steady intracavity amplitude of magnitude α)."""
        return self.alpha * self.kappa_t / 2.0

    @property
    def epsilon(self) -> float:
        """Common bang amplitude when ``ε₁ = ε₂`` (the default setup)."""
        if self.epsilon1 != self.epsilon2:
            raise ParameterError(
                "epsilon is ambiguous: epsilon1 != epsilon2; use them directly"
            )
        return self.epsilon1

    @classmethod
    def canonical(
        cls,
        *,
        eta: float = 1.0,
        epsilon: float = 0.1,
        epsilon1: float | None = None,
        epsilon2: float | None = None,
    ) -> "ScaledParams":
        """The canonical scaled set ``k̃ = 0.155``, ``Γ = 23.6``.

        The remaining rates are completed from the exact identities and the
        canonical physical ratios ``Δ/κ = 100`` and ``γ/κ = 0.13``, so the
        instance is exactly self-consistent. The unit anchors correspond to
        the cesium D2 configuration that realizes these numbers.
        """
        ktilde = 0.155
        Gamma = 23.6
        alpha = 1.0
        # Γ = 2π²/(α²k̃⁴κ̃)  ⇒  κ̃ from (k̃, Γ); Δ̃ and γ̃ from physical ratios.
        kappa_t = 2.0 * math.pi**2 / (alpha**2 * ktilde**4 * Gamma)
        delta_t = 100.0 * kappa_t
        g_t = math.sqrt(math.pi * delta_t) / (alpha * ktilde)
        gamma_t = 0.13 * kappa_t
        phys = PhysicalParams.cesium_d2(alpha=alpha)
        time_unit = kappa_t / phys.kappa
        length_unit = ktilde / phys.wavenumber
        return cls(
            ktilde=ktilde,
            Gamma=Gamma,
            eta=eta,
            epsilon1=epsilon if epsilon1 is None else epsilon1,
            epsilon2=epsilon if epsilon2 is None else epsilon2,
            gamma_t=gamma_t,
            kappa_t=kappa_t,
            delta_t=delta_t,
            g_t=g_t,
            alpha=alpha,
            time_unit=time_unit,
            length_unit=length_unit,
        )


class ControlLevel(Enum):
    """Bang-bang control level of the cavity drive field.

    The drive field amplitude is multiplied by ``1+ε₁`` (High) or ``1−ε₂``
    (Low); potential depth and measurement strength scale with the field
    intensity, i.e. with the square of that factor.
    """

    NOMINAL = "nominal"
    HIGH = "high"
    LOW = "low"

    def amplitude(self, epsilon1: float, epsilon2: float) -> float:
        """Field-amplitude multiplier: 1, ``1+ε₁``, or ``1−ε₂``."""
        if self is ControlLevel.HIGH:
            return 1.0 + epsilon1
        if self is ControlLevel.LOW:
            return 1.0 - epsilon2
        return 1.0

    def factor(self, epsilon1: float, epsilon2: float) -> float:
        """Intensity multiplier applied to both ``V_max`` and ``Γ``."""
        return self.amplitude(epsilon1, epsilon2) ** 2


def _require_positive(**values: float) -> None:
    for name, value in values.items():
        if not (value > 0.0) or not math.isfinite(value):
            raise ParameterError(f"{name} must be finite and > 0, got {value!r}")


def measurement_strength(
    alpha: float, g_t: float, delta_t: float, kappa_t: float
) -> float:
    """Effective measurement strength ``Γ = 2α²g̃⁴/(Δ̃²κ̃)``."""
    return 2.0 * alpha**2 * g_t**4 / (delta_t**2 * kappa_t)


def derive_scaled(
    p: PhysicalParams,
    *,
    eta: float = 1.0,
    epsilon1: float = 0.1,
    epsilon2: float | None = None,
) -> ScaledParams:
    """Convert laboratory parameters to the dimensionless scaled set.

    The detection efficiency and bang amplitudes are properties of the
    control loop rather than of the atom-cavity system, so they are supplied
    here (``epsilon2`` defaults to ``epsilon1``).

    Raises
    ------
    ParameterError
        If any rate is non-positive, ``eta`` lies outside ``[0, 1]``, a bang
        amplitude lies outside ``[0, 1)``, or the wavenumber is inconsistent
        with ``ω_A = c·k + Δ``.
    """
    _require_positive(
        mass=p.mass,
        omega_atom=p.omega_atom,
        gamma=p.gamma,
        kappa=p.kappa,
        g=p.g,
        detuning=p.detuning,
        alpha=p.alpha,
        wavenumber=p.wavenumber,
    )
    if epsilon2 is None:
        epsilon2 = epsilon1
    if not 0.0 <= eta <= 1.0:
        raise ParameterError(f"eta must lie in [0, 1], got {eta!r}")
    for name, eps in (("epsilon1", epsilon1), ("epsilon2", epsilon2)):
        if not 0.0 <= eps < 1.0:
            raise ParameterError(f"{name} must lie in [0, 1), got {eps!r}")
    omega_laser = SPEED_OF_LIGHT * p.wavenumber
    if abs(omega_laser + p.detuning - p.omega_atom) > 1e-6 * p.omega_atom:
        raise ParameterError(
            "wavenumber inconsistent with omega_atom = c*k + detuning "
            f"(laser at {omega_laser:.6e} rad/s, expected "
            f"{p.omega_atom - p.detuning:.6e})"
        )

    omega_ho = p.alpha * p.g * p.wavenumber * math.sqrt(
        2.0 * HBAR / (p.mass * p.detuning)
    )
    time_unit = 2.0 * math.pi / omega_ho
    length_unit = math.sqrt(HBAR / (p.mass * omega_ho))
    delta_t = p.detuning * time_unit
    kappa_t = p.kappa * time_unit
    g_t = p.g * time_unit
    Gamma = measurement_strength(p.alpha, g_t, delta_t, kappa_t)
    return ScaledParams(
        ktilde=p.wavenumber * length_unit,
        Gamma=Gamma,
        eta=eta,
        epsilon1=epsilon1,
        epsilon2=epsilon2,
        gamma_t=p.gamma * time_unit,
        kappa_t=kappa_t,
        delta_t=delta_t,
        g_t=g_t,
        alpha=p.alpha,
        time_unit=time_unit,
        length_unit=length_unit,
    )


def to_physical(sp: ScaledParams) -> PhysicalParams:
    """Invert :func:`derive_scaled`, reconstructing the laboratory set.

    Requires a consistent instance (the ``g̃``-identity must hold — it does
    for both package constructors); otherwise the stated scaled values could
    not all have come from one physical system.
    """
    _require_positive(
        ktilde=sp.ktilde,
        time_unit=sp.time_unit,
        length_unit=sp.length_unit,
        g_t=sp.g_t,
        delta_t=sp.delta_t,
        kappa_t=sp.kappa_t,
        gamma_t=sp.gamma_t,
        alpha=sp.alpha,
    )
    g_identity = math.sqrt(math.pi * sp.delta_t) / (sp.alpha * sp.ktilde)
    if abs(sp.g_t - g_identity) > 1e-9 * g_identity:
        raise ParameterError(
            "scaled set is inconsistent: g_t does not satisfy "
            "g̃ = sqrt(π·Δ̃)/(α·k̃); cannot map back to a physical system"
        )
    omega_ho = 2.0 * math.pi / sp.time_unit
    mass = HBAR / (sp.length_unit**2 * omega_ho)
    wavenumber = sp.ktilde / sp.length_unit
    detuning = sp.delta_t / sp.time_unit
    return PhysicalParams(
        mass=mass,
        omega_atom=SPEED_OF_LIGHT * wavenumber + detuning,
        gamma=sp.gamma_t / sp.time_unit,
        kappa=sp.kappa_t / sp.time_unit,
        g=sp.g_t / sp.time_unit,
        detuning=detuning,
        alpha=sp.alpha,
        wavenumber=wavenumber,
    )


def effective_energy(moments: "Moments", vmax: float) -> float:
    """Motional energy ``E_eff = π⟨P²⟩ + V_max(1 − ⟨cos²(k̃X)⟩)``.

    Measured from the potential minimum so it is non-negative. Pass the
    *nominal* (unmodulated) ``vmax`` even while feedback modulates the
    lattice, so energy traces are comparable across control states.
    """
    p_squared = moments.vp + moments.p**2
    return math.pi * p_squared + vmax * (1.0 - moments.cossq)


def heating_rate_uniform(Gamma: float, ktilde: float) -> float:
    """Measurement back-action heating rate ``πΓk̃²`` for an atom whose
    position is uniformly distributed over the lattice."""
    return math.pi * Gamma * ktilde**2


def heating_rate_lowtemp(Gamma: float, ktilde: float, energy: float) -> float:
    """Measurement heating rate ``4Γk̃⁴·E`` valid near the bottom of a well
    (energy small compared to the depth)."""
    return 4.0 * Gamma * ktilde**4 * energy


def heating_rate_general(Gamma: float, ktilde: float, sin2_sq: float) -> float:
    """Exact measurement heating rate ``2πΓk̃²⟨sin²(2k̃X)⟩``.

    Reduces to :func:`heating_rate_uniform` for a uniform position
    distribution (``⟨sin²⟩ = 1/2``) and to :func:`heating_rate_lowtemp`
    near a well bottom (``⟨sin²(2k̃X)⟩ ≈ 4k̃²⟨X²⟩ ≈ 2k̃²E/π``).
    """
    return 2.0 * math.pi * Gamma * ktilde**2 * sin2_sq


@dataclass(frozen=True)
class CoolingLimits:
    """Closed-form steady-state predictions of the feedback cooling theory.

    ``beta = Γk̃⁴/(2ε)`` balances measurement heating against feedback
    cooling. For ``beta < 1`` the loop cools to a steady energy of order the
    ground state; at ``beta ≥ 1`` heating wins and the steady energies
    diverge (``controllable`` is False and the limits are ``inf``).

    ``eps_b = Γk̃⁴`` and ``Gamma_b = ε/k̃⁴`` are the border values of ε and
    Γ beyond which ground-state cooling is no longer expected; both sit at
    ``beta = 1/2``, where the predicted steady energy has doubled (the
    formal divergence of the limits is at ``beta = 1``).
    """

    beta: float
    E_ss_centroid: float     # E₀/(1−β), centroid-tracking argument
    E_ss_parity_avg: float   # 2π/(1−β), average over the two parity wells
    E_ss_variance: float     # E₀/√(1−β²), including variance dynamics
    eps_b: float
    Gamma_b: float
    controllable: bool


def cooling_limits(Gamma: float, ktilde: float, epsilon: float) -> CoolingLimits:
    """Evaluate the closed-form cooling limits and controllability borders.

    Uses the harmonic level energies ``E₀ = π`` and ``E₁ = 3π`` inside the
    limit formulas (the exact band energies differ by a few percent; the
    harmonic values are the ones the closed forms are derived with).
    """
    if Gamma < 0.0 or ktilde <= 0.0 or epsilon < 0.0:
        raise ParameterError(
            f"need Gamma >= 0, ktilde > 0, epsilon >= 0; got "
            f"({Gamma!r}, {ktilde!r}, {epsilon!r})"
        )
    eps_b = Gamma * ktilde**4
    gamma_b = epsilon / ktilde**4 if epsilon > 0.0 else 0.0
    beta = math.inf if epsilon == 0.0 else Gamma * ktilde**4 / (2.0 * epsilon)
    if beta >= 1.0:
        return CoolingLimits(
            beta=beta,
            E_ss_centroid=math.inf,
            E_ss_parity_avg=math.inf,
            E_ss_variance=math.inf,
            eps_b=eps_b,
            Gamma_b=gamma_b,
            controllable=False,
        )
    return CoolingLimits(
        beta=beta,
        E_ss_centroid=_E0_HARMONIC / (1.0 - beta),
        E_ss_parity_avg=(_E0_HARMONIC + _E1_HARMONIC) / 2.0 / (1.0 - beta),
        E_ss_variance=_E0_HARMONIC / math.sqrt(1.0 - beta**2),
        eps_b=eps_b,
        Gamma_b=gamma_b,
        controllable=True,
    )


@dataclass(frozen=True)
class SqueezeFactors:
    """Variance factors for one idealized bang-bang half-period.

    Switching the lattice between the high and low levels at the right
    phases multiplies the tracked variance by the cooling factor ``C_fb``
    per cycle; the conjugate variance grows by the magnification factor
    ``M_fb = 1/C_fb``.
    """

    C_fb: float
    M_fb: float


def squeeze_factors(epsilon1: float, epsilon2: float) -> SqueezeFactors:
    """``C_fb = ((1−ε₂)/(1+ε₁))²`` and its inverse ``M_fb``."""
    for name, eps in (("epsilon1", epsilon1), ("epsilon2", epsilon2)):
        if not 0.0 <= eps < 1.0:
            raise ParameterError(f"{name} must lie in [0, 1), got {eps!r}")
    c_fb = ((1.0 - epsilon2) / (1.0 + epsilon1)) ** 2
    return SqueezeFactors(C_fb=c_fb, M_fb=1.0 / c_fb)
