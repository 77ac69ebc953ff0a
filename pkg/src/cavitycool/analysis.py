"""Derived diagnostics: band structure, parity, and ensemble statistics.

Everything here is a pure function over recorded states — nothing feeds
back into the dynamics.

**Band structure.** The effective Hamiltonian ``H = πP² − V_max cos²(k̃X)
+ V_max`` (minimum-referenced, nominal depth, no absorber) is diagonalized
in the plane-wave basis. On a commensurate grid the potential couples only
momenta separated by ±2k̃, which is exactly ``W`` grid momenta (``W`` =
number of wells), so the full matrix splits into ``W`` independent
tridiagonal ladders — one per quasimomentum class. Each ladder yields one
state per band; band ``b`` collects the ``b``-th state of every class.
This is exact for the discretized operator (the sampled cos² has exactly
three Fourier components), and costs ``W`` small tridiagonal problems
instead of one dense ``N_g × N_g`` one.

**Reduced parity.** A state spread over several wells has near-zero
overlap with its mirror image about ``x = 0`` even when it is perfectly
(anti)symmetric about the well it lives in. The reduction operator folds
the state by the well period,

    (Rψ)(x) = Σ_j ψ(x − jπ/k̃),   x ∈ one well period,

and the reduced parity ⟨P′⟩ is the ordinary parity of the folded,
renormalized state — it detects symmetry about *any* well center. On the
periodic fold cell, reflection about a well bottom and about a barrier
top are the same map, so the result does not depend on which symmetry
point the grid starts at. The parity projectors ``P± = (1 ± P)/2``, their
product ⟨P₊⟩⟨P₋⟩ (0 for pure parity, 1/4 for an equal mixture) and the
parity difference

    ℘ = ⟨P₊ cos²k̃X⟩/⟨P₊⟩ − ⟨P₋ cos²k̃X⟩/⟨P₋⟩

are all evaluated on the folded state; ℘ is undefined (reported as NaN,
never as zero) when either projector expectation vanishes — a state of
pure parity gives the measurement nothing to resolve.

**Ensemble statistics.** Pointwise mean and standard error over
trajectories on a shared time grid, plus a late-window scalar statistic
(per-trajectory window means first, then mean and standard error across
trajectories).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .errors import ParameterError, UndefinedParityError
from .sim_adiabatic import Grid

__all__ = [
    "BandBasis",
    "ParityReport",
    "ParitySeries",
    "EnsembleStats",
    "band_basis",
    "band_populations",
    "reduced_parity",
    "parity_report",
    "parity_product_series",
    "ensemble_stats",
]

# Fold norm below this fraction of the state norm counts as destroyed by
# interference: the reduced parity is undefined there.
FOLD_NORM_FLOOR = 1e-12

# Projector expectation below this counts as vanished: ℘ is undefined.
PARITY_FLOOR = 1e-12


def _state_array(psi) -> np.ndarray:
    """Accept a bare complex array or anything carrying ``.psi``."""
    return np.asarray(getattr(psi, "psi", psi))


# ---------------------------------------------------------------------------
# band structure
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class BandBasis:
    """Eigensystem of the nominal lattice, grouped into bands.

    ``energies[b, r]`` is the energy of band ``b`` in quasimomentum class
    ``r``; ``class_vectors[r][:, b]`` are the plane-wave coefficients of
    that state on the momenta ``grid.p[class_indices[r]]`` (sorted
    ascending). Energies are minimum-referenced: the well bottom is 0.
    """

    grid: Grid
    ktilde: float
    vmax: float
    energies: np.ndarray
    class_vectors: tuple[np.ndarray, ...]
    class_indices: tuple[np.ndarray, ...]

    @property
    def wells(self) -> int:
        """Number of quasimomentum classes (= states per band)."""
        return len(self.class_indices)

    @property
    def n_bands(self) -> int:
        return self.energies.shape[0]

    @property
    def n_trapped(self) -> int:
        """Contiguous low bands whose top lies below the barrier ``V_max``."""
        above = self.energies.max(axis=1) >= self.vmax
        return int(np.argmax(above)) if above.any() else self.n_bands

    def band_energies(self, band: int) -> np.ndarray:
        return self.energies[band]

    def band_width(self, band: int) -> float:
        e = self.energies[band]
        return float(e.max() - e.min())

    def band_gap(self, band: int) -> float:
        """Gap from the top of ``band`` to the bottom of the next."""
        return float(self.energies[band + 1].min() - self.energies[band].max())

    def eigenstate(self, band: int, klass: int = 0) -> np.ndarray:
        """The (band, class) eigenstate as a normalized grid wavefunction."""
        n = self.grid.n
        k_int = np.rint(self.grid.p / (2.0 * math.pi / (n * self.grid.dx)))
        coeff = np.zeros(n, dtype=complex)
        idx = self.class_indices[klass]
        coeff[idx] = self.class_vectors[klass][:, band] * np.exp(
            -1j * math.pi * k_int[idx]
        )
        length = n * self.grid.dx
        return np.fft.ifft(coeff) * n / math.sqrt(length)


def _plane_wave_coeffs(grid: Grid, psi: np.ndarray) -> np.ndarray:
    """Overlaps ⟨e^{ip_j x}/√L | ψ⟩ on the fft momentum layout."""
    n = grid.n
    length = n * grid.dx
    k_int = np.rint(grid.p / (2.0 * math.pi / length))
    return np.fft.fft(psi) * np.exp(1j * math.pi * k_int) * grid.dx / math.sqrt(length)


def band_basis(grid: Grid, ktilde: float, vmax: float) -> BandBasis:
    """Diagonalize ``πP² − V_max cos²(k̃X) + V_max`` on the grid.

    The grid must be commensurate with the lattice: ``2k̃`` must be an
    integer number of momentum-grid steps (equivalently, the domain must
    hold a whole number of wells).
    """
    if ktilde <= 0.0 or not math.isfinite(ktilde):
        raise ParameterError(f"ktilde must be finite and > 0, got {ktilde!r}")
    if vmax <= 0.0 or not math.isfinite(vmax):
        raise ParameterError(f"vmax must be finite and > 0, got {vmax!r}")
    n = grid.n
    dp = 2.0 * math.pi / (n * grid.dx)
    wells_f = 2.0 * ktilde / dp
    wells = int(round(wells_f))
    if wells < 1 or abs(wells_f - wells) > 1e-9 or n % wells != 0:
        raise ParameterError(
            f"grid incommensurate with the lattice: 2*ktilde spans "
            f"{wells_f!r} momentum steps (need a positive integer dividing "
            f"the grid size {n})"
        )
    k_int = np.rint(grid.p / dp).astype(int)
    ladder = n // wells
    energies = np.empty((ladder, wells))
    vectors = []
    indices = []
    for r in range(wells):
        idx = np.flatnonzero(np.mod(k_int, wells) == r)
        idx = idx[np.argsort(k_int[idx])]
        diag = math.pi * grid.p[idx] ** 2 + 0.5 * vmax
        off = np.full(ladder - 1, -0.25 * vmax)
        vals, vecs = eigh_tridiagonal(diag, off)
        energies[:, r] = vals
        vectors.append(vecs)
        indices.append(idx)
    return BandBasis(
        grid=grid,
        ktilde=ktilde,
        vmax=vmax,
        energies=energies,
        class_vectors=tuple(vectors),
        class_indices=tuple(indices),
    )


def band_populations(psi, basis: BandBasis, n_bands: int) -> np.ndarray:
    """Per-band summed squared overlaps of ψ with the first ``n_bands``.

    ψ is normalized internally, so the populations refer to the
    conditional (renormalized) state; their total over all bands is 1 and
    over the first ``n_bands`` is ≤ 1.
    """
    if not 1 <= n_bands <= basis.n_bands:
        raise ParameterError(
            f"n_bands must lie in [1, {basis.n_bands}], got {n_bands!r}"
        )
    state = _state_array(psi)
    if state.shape != (basis.grid.n,):
        raise ParameterError(
            f"state has shape {state.shape}, expected ({basis.grid.n},)"
        )
    coeff = _plane_wave_coeffs(basis.grid, state)
    norm_sq = float(np.vdot(coeff, coeff).real)
    if norm_sq <= 0.0:
        raise ParameterError("cannot compute band populations of a null state")
    pops = np.zeros(n_bands)
    for vecs, idx in zip(basis.class_vectors, basis.class_indices):
        proj = vecs[:, :n_bands].T @ coeff[idx].conj()
        pops += np.abs(proj) ** 2
    return pops / norm_sq


# ---------------------------------------------------------------------------
# reduced parity
# ---------------------------------------------------------------------------


def _folded(grid: Grid, psi) -> np.ndarray:
    """Fold ψ by the well period onto one cell of M points."""
    state = _state_array(psi)
    if state.shape != (grid.n,):
        raise ParameterError(
            f"state has shape {state.shape}, expected ({grid.n},)"
        )
    cell = grid.n // grid.wells
    if cell % 2 != 0:
        raise ParameterError(
            f"reduced parity needs an even number of points per well, "
            f"got {cell}"
        )
    folded = state.reshape(grid.wells, cell).sum(axis=0)
    total = float(np.vdot(state, state).real)
    fold_norm = float(np.vdot(folded, folded).real)
    if fold_norm <= FOLD_NORM_FLOOR * total:
        raise UndefinedParityError(
            "folded state has vanishing norm (destructive interference "
            "between wells): reduced parity is undefined"
        )
    return folded


def _reflect(folded: np.ndarray) -> np.ndarray:
    """Spatial reflection about the cell's symmetry point: f(φ) → f(−φ)."""
    return np.roll(folded[::-1], 1)


def reduced_parity(grid: Grid, psi) -> float:
    """⟨P′⟩: parity of the well-period-folded, renormalized state."""
    folded = _folded(grid, psi)
    mirrored = _reflect(folded)
    even_sq = float(np.vdot(folded + mirrored, folded + mirrored).real) / 4.0
    odd_sq = float(np.vdot(folded - mirrored, folded - mirrored).real) / 4.0
    return (even_sq - odd_sq) / (even_sq + odd_sq)


@dataclass(frozen=True)
class ParityReport:
    """Reduced-parity diagnostics of one state.

    ``wp`` (the parity difference ℘) is NaN when either projector
    expectation vanishes — missing, not zero.
    """

    parity: float
    product: float
    wp: float

    @property
    def p_plus(self) -> float:
        return 0.5 * (1.0 + self.parity)

    @property
    def p_minus(self) -> float:
        return 0.5 * (1.0 - self.parity)


def parity_report(grid: Grid, psi) -> ParityReport:
    """⟨P′⟩, the projector product ⟨P₊⟩⟨P₋⟩, and the parity difference ℘."""
    folded = _folded(grid, psi)
    mirrored = _reflect(folded)
    f_even = 0.5 * (folded + mirrored)
    f_odd = 0.5 * (folded - mirrored)
    n_even = float(np.vdot(f_even, f_even).real)
    n_odd = float(np.vdot(f_odd, f_odd).real)
    total = n_even + n_odd
    parity = (n_even - n_odd) / total
    product = n_even * n_odd / total**2
    if min(n_even, n_odd) <= PARITY_FLOOR * total:
        wp = math.nan
    else:
        cell = grid.n // grid.wells
        cos_sq = np.cos(grid.ktilde * grid.x[:cell]) ** 2
        cos_even = float(np.dot(np.abs(f_even) ** 2, cos_sq))
        cos_odd = float(np.dot(np.abs(f_odd) ** 2, cos_sq))
        wp = cos_even / n_even - cos_odd / n_odd
    return ParityReport(parity=parity, product=product, wp=wp)


@dataclass(frozen=True)
class ParitySeries:
    """Reduced-parity diagnostics along one recorded trajectory."""

    parity: np.ndarray
    product: np.ndarray
    wp: np.ndarray


def parity_product_series(grid: Grid, states: Sequence) -> ParitySeries:
    """Evaluate :func:`parity_report` over a sequence of recorded states."""
    reports = [parity_report(grid, s) for s in states]
    return ParitySeries(
        parity=np.array([r.parity for r in reports]),
        product=np.array([r.product for r in reports]),
        wp=np.array([r.wp for r in reports]),
    )


# ---------------------------------------------------------------------------
# ensemble statistics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EnsembleStats:
    """Pointwise ensemble statistics and an optional window scalar."""

    times: np.ndarray
    mean: np.ndarray
    sem: np.ndarray
    n: int
    window: tuple[float, float] | None = None
    window_mean: float | None = None
    window_sem: float | None = None


def _record_arrays(record) -> tuple[np.ndarray, np.ndarray]:
    if hasattr(record, "times") and hasattr(record, "values"):
        return np.asarray(record.times), np.asarray(record.values)
    times, values = record
    return np.asarray(times), np.asarray(values)


def ensemble_stats(
    records: Sequence, window: tuple[float, float] | None = None
) -> EnsembleStats:
    """Mean and standard error over trajectories on a shared time grid.

    ``records`` is a sequence of ``(times, values)`` pairs (or objects with
    ``.times``/``.values``); all time grids must match exactly. With a
    ``window = (t1, t2)``, each trajectory is first averaged over the
    window, and the mean and standard error of those per-trajectory
    averages are reported — trajectories, not time points, are the
    independent samples.
    """
    if len(records) < 2:
        raise ParameterError(
            f"ensemble statistics need at least 2 records, got {len(records)}"
        )
    times, first = _record_arrays(records[0])
    values = np.empty((len(records), times.size))
    values[0] = first
    for i, record in enumerate(records[1:], start=1):
        t_i, v_i = _record_arrays(record)
        if t_i.shape != times.shape or not np.array_equal(t_i, times):
            raise ParameterError(
                f"record {i} has a mismatched time grid "
                f"({t_i.size} points vs {times.size})"
            )
        values[i] = v_i
    n = len(records)
    mean = values.mean(axis=0)
    sem = values.std(axis=0, ddof=1) / math.sqrt(n)
    window_mean = window_sem = None
    if window is not None:
        t1, t2 = window
        sel = (times >= t1) & (times <= t2)
        if not np.any(sel):
            raise ParameterError(
                f"window [{t1}, {t2}] contains no recorded times"
            )
        per_traj = values[:, sel].mean(axis=1)
        window_mean = float(per_traj.mean())
        window_sem = float(per_traj.std(ddof=1) / math.sqrt(n))
    return EnsembleStats(
        times=times,
        mean=mean,
        sem=sem,
        n=n,
        window=window,
        window_mean=window_mean,
        window_sem=window_sem,
    )
