"""Tests for band structure, reduced parity, and ensemble statistics."""

import math

import numpy as np
import pytest
from scipy.special import mathieu_a, mathieu_b

from cavitycool.analysis import (
    band_basis,
    band_populations,
    ensemble_stats,
    parity_product_series,
    parity_report,
    reduced_parity,
)
from cavitycool.errors import ParameterError, UndefinedParityError
from cavitycool.model import ScaledParams
from cavitycool.noise import NoiseStream
from cavitycool.sim_adiabatic import (
    AdiabaticEngine,
    Grid,
    Wavefunction,
    compute_moments,
    init_coherent,
    make_grid,
)

SP = ScaledParams.canonical()
DT = 5e-4
GRID = make_grid(2048, 16, SP.ktilde)
SMALL = make_grid(256, 2, SP.ktilde)
BASIS = band_basis(GRID, SP.ktilde, SP.vmax)


class ZeroStream:
    def normal(self, size=None):
        return np.zeros(size) if size else 0.0


class TestBandBasis:
    def test_lowest_band_energies(self):
        e0 = BASIS.band_energies(0).mean()
        e1 = BASIS.band_energies(1).mean()
        assert e0 == pytest.approx(3.12, rel=0.01)
        assert e1 == pytest.approx(9.33, rel=0.01)

    def test_matches_mathieu_characteristic_values(self):
        # continuum oracle: E_n = πk̃²·a_n(Q) + V_max/2 with Q = 1/(4k̃⁴)
        # deep-lattice band n has edges (a_n, b_{n+1}), exponentially close
        q = 1.0 / (4.0 * SP.ktilde**4)
        scale = math.pi * SP.ktilde**2
        e0_ref = scale * float(mathieu_a(0, q)) + SP.vmax / 2
        e0_top = scale * float(mathieu_b(1, q)) + SP.vmax / 2
        e1_ref = scale * float(mathieu_a(1, q)) + SP.vmax / 2
        assert BASIS.energies[0, 0] == pytest.approx(e0_ref, rel=1e-10)
        assert BASIS.energies[1, 0] == pytest.approx(e1_ref, rel=1e-10)
        assert abs(e0_top - e0_ref) < 1e-10  # ground band is that flat

    def test_ground_band_width(self):
        assert BASIS.band_width(0) <= 1e-10

    def test_trapped_band_count(self):
        assert BASIS.n_trapped >= 25

    def test_harmonic_limit_of_lowest_bands(self):
        # deep lattice: E₀ ≈ π and E₁ ≈ 3π (harmonic ladder spacing 2π)
        assert BASIS.energies[0, 0] == pytest.approx(math.pi, rel=0.02)
        assert BASIS.energies[1, 0] == pytest.approx(3 * math.pi, rel=0.04)

    def test_eigenvalues_nondecreasing_within_class(self):
        # above-barrier ±p pairs are exactly degenerate, so nondecreasing,
        # not strictly increasing
        assert np.all(np.diff(BASIS.energies, axis=0) >= -1e-9)

    def test_trapped_band_spread_well_below_gap(self):
        for b in range(5):
            assert BASIS.band_width(b) < 1e-6 * BASIS.band_gap(b)

    def test_matches_dense_diagonalization(self):
        # oracle: dense H on the small grid, no class decomposition
        n = SMALL.n
        kin = np.fft.ifft(
            math.pi * SMALL.p[:, None] ** 2 * np.fft.fft(np.eye(n), axis=0),
            axis=0,
        )
        pot = SP.vmax * (1.0 - np.cos(SP.ktilde * SMALL.x) ** 2)
        h = kin + np.diag(pot)
        dense = np.linalg.eigvalsh(0.5 * (h + h.conj().T))
        bb = band_basis(SMALL, SP.ktilde, SP.vmax)
        ours = np.sort(bb.energies.ravel())
        assert np.allclose(ours[:60], dense[:60], rtol=1e-9, atol=1e-9)

    def test_eigenstates_orthonormal(self):
        s00 = BASIS.eigenstate(0, 0)
        s10 = BASIS.eigenstate(1, 0)
        s03 = BASIS.eigenstate(0, 3)
        dx = GRID.dx
        assert np.vdot(s00, s00).real * dx == pytest.approx(1.0, abs=1e-12)
        assert abs(np.vdot(s00, s10)) * dx < 1e-12
        assert abs(np.vdot(s00, s03)) * dx < 1e-12

    def test_incommensurate_ktilde_rejected(self):
        with pytest.raises(ParameterError):
            band_basis(GRID, 0.1234, SP.vmax)

    def test_bad_vmax_rejected(self):
        with pytest.raises(ParameterError):
            band_basis(GRID, SP.ktilde, -1.0)


class TestBandPopulations:
    def test_ground_eigenstate(self):
        pops = band_populations(BASIS.eigenstate(0, 0), BASIS, 5)
        assert pops[0] == pytest.approx(1.0, abs=1e-9)
        assert np.all(pops[1:] < 1e-12)

    def test_excited_eigenstate_lands_in_its_band(self):
        pops = band_populations(BASIS.eigenstate(3, 7), BASIS, 6)
        assert pops[3] == pytest.approx(1.0, abs=1e-9)

    def test_total_at_most_one(self):
        rng = np.random.default_rng(5)
        for _ in range(5):
            psi = rng.standard_normal(GRID.n) + 1j * rng.standard_normal(GRID.n)
            pops = band_populations(psi, BASIS, BASIS.n_bands)
            assert pops.sum() <= 1.0 + 1e-9

    def test_cold_packet_mostly_ground_band(self):
        wf = init_coherent(GRID, 0.0, 0.0, 0.5, 0.5)
        pops = band_populations(wf, BASIS, 3)
        assert pops[0] > 0.95
        assert pops.sum() <= 1.0 + 1e-9

    def test_energy_cross_check(self):
        # the moments route and the eigensystem route measure the same
        # operator: E_eff of an eigenstate equals its eigenvalue
        psi = BASIS.eigenstate(0, 0)
        m = compute_moments(GRID, psi, SP.vmax)
        assert m.energy == pytest.approx(BASIS.energies[0, 0], rel=1e-12)

    def test_n_bands_validated(self):
        with pytest.raises(ParameterError):
            band_populations(BASIS.eigenstate(0, 0), BASIS, 0)
        with pytest.raises(ParameterError):
            band_populations(BASIS.eigenstate(0, 0), BASIS, BASIS.n_bands + 1)

    def test_null_state_rejected(self):
        with pytest.raises(ParameterError):
            band_populations(np.zeros(GRID.n, dtype=complex), BASIS, 2)


class TestReducedParity:
    def test_even_packet_at_center_well(self):
        wf = init_coherent(GRID, 0.0, 0.0, 0.5, 0.5)
        assert reduced_parity(GRID, wf) == pytest.approx(1.0, abs=1e-9)

    def test_even_packet_at_any_well(self):
        wf = init_coherent(GRID, 2.0 * math.pi / SP.ktilde, 0.0, 0.5, 0.5)
        assert reduced_parity(GRID, wf) == pytest.approx(1.0, abs=1e-9)

    def test_first_excited_band_is_odd(self):
        psi = BASIS.eigenstate(1, 0)
        assert reduced_parity(GRID, psi) == pytest.approx(-1.0, abs=1e-9)

    def test_displaced_packet_is_equal_mixture(self):
        wf = init_coherent(GRID, 6.0, 0.0, 0.5, 0.5)
        assert abs(reduced_parity(GRID, wf)) < 1e-4

    def test_bounded_for_random_states(self):
        rng = np.random.default_rng(6)
        for _ in range(25):
            psi = rng.standard_normal(GRID.n) + 1j * rng.standard_normal(GRID.n)
            assert abs(reduced_parity(GRID, psi)) <= 1.0 + 1e-12

    def test_nonzero_quasimomentum_folds_to_nothing(self):
        # folding projects onto quasimomentum zero; any other Bloch class
        # interferes away entirely
        with pytest.raises(UndefinedParityError):
            reduced_parity(GRID, BASIS.eigenstate(0, 3))

    def test_antisymmetric_cat_between_wells_undefined(self):
        period = math.pi / SP.ktilde
        a = init_coherent(GRID, 0.0, 0.0, 0.5, 0.5).psi
        b = init_coherent(GRID, period, 0.0, 0.5, 0.5).psi
        with pytest.raises(UndefinedParityError):
            reduced_parity(GRID, (a - b) / math.sqrt(2.0))

    def test_odd_points_per_well_rejected(self):
        # a hand-built grid with one point per well (make_grid would
        # refuse to construct it)
        n = 256
        dx = (2 * math.pi / SP.ktilde) / n
        bad = Grid(
            n=n,
            wells=n,
            ktilde=SP.ktilde,
            x=(np.arange(n) - n // 2) * dx,
            dx=dx,
            p=2 * math.pi * np.fft.fftfreq(n, dx),
        )
        with pytest.raises(ParameterError):
            reduced_parity(bad, np.ones(n, dtype=complex))

    def test_parity_invariant_under_noiseless_step(self):
        # with the stochastic term disabled the dynamics are parity-even,
        # so a parity eigenstate must stay one (measurement drift included)
        eng = AdiabaticEngine(SMALL, SP, DT)
        stream = ZeroStream()
        wf = init_coherent(SMALL, 0.0, 0.0, 0.5, 0.5)
        for _ in range(200):
            eng.sse_step(wf, 1.0, stream)
        assert reduced_parity(SMALL, wf) == pytest.approx(1.0, abs=1e-9)

        small_basis = band_basis(SMALL, SP.ktilde, SP.vmax)
        wf_odd = Wavefunction(psi=small_basis.eigenstate(1, 0))
        for _ in range(200):
            eng.sse_step(wf_odd, 1.0, stream)
        assert reduced_parity(SMALL, wf_odd) == pytest.approx(-1.0, abs=1e-9)


class TestParityReport:
    def test_pure_state_product_zero_wp_missing(self):
        rep = parity_report(GRID, BASIS.eigenstate(0, 0))
        assert rep.parity == pytest.approx(1.0, abs=1e-12)
        assert rep.product == pytest.approx(0.0, abs=1e-12)
        assert math.isnan(rep.wp)

    def test_equal_mixture_product_quarter(self):
        psi = (BASIS.eigenstate(0, 0) + BASIS.eigenstate(1, 0)) / math.sqrt(2)
        rep = parity_report(GRID, psi)
        assert rep.parity == pytest.approx(0.0, abs=1e-12)
        assert rep.product == pytest.approx(0.25, abs=1e-12)
        assert math.isfinite(rep.wp)

    def test_projector_expectations_sum_to_one(self):
        wf = init_coherent(GRID, 4.0, 1.0, 0.5, 0.5)
        rep = parity_report(GRID, wf)
        assert rep.p_plus + rep.p_minus == pytest.approx(1.0, abs=1e-12)
        assert 0.0 <= rep.product <= 0.25 + 1e-12

    def test_wp_matches_dense_projector_oracle(self):
        psi = (BASIS.eigenstate(0, 0) + BASIS.eigenstate(1, 0)) / math.sqrt(2)
        rep = parity_report(GRID, psi)
        cell = GRID.n // GRID.wells
        folded = psi.reshape(GRID.wells, cell).sum(axis=0)
        reflect = np.zeros((cell, cell))
        for m in range(cell):
            reflect[m, (cell - m) % cell] = 1.0
        f_even = 0.5 * (folded + reflect @ folded)
        f_odd = 0.5 * (folded - reflect @ folded)
        cos_sq = np.cos(SP.ktilde * GRID.x[:cell]) ** 2
        oracle = float(
            np.abs(f_even) ** 2 @ cos_sq / np.vdot(f_even, f_even).real
            - np.abs(f_odd) ** 2 @ cos_sq / np.vdot(f_odd, f_odd).real
        )
        assert rep.wp == pytest.approx(oracle, rel=1e-12)

    def test_series_marks_missing_wp(self):
        states = [
            BASIS.eigenstate(0, 0),
            (BASIS.eigenstate(0, 0) + BASIS.eigenstate(1, 0)) / math.sqrt(2),
        ]
        series = parity_product_series(GRID, states)
        assert series.parity.shape == (2,)
        assert math.isnan(series.wp[0])
        assert math.isfinite(series.wp[1])
        assert series.product[0] == pytest.approx(0.0, abs=1e-12)
        assert series.product[1] == pytest.approx(0.25, abs=1e-12)


@pytest.fixture(scope="module")
def parity_runs():
    # 16 measured trajectories from a symmetric (equal-mixture) start:
    # a packet displaced a quarter period from a well bottom
    eng = AdiabaticEngine(SMALL, SP, DT)
    x0 = 0.25 * math.pi / SP.ktilde
    n_traj, n_steps, sample_every = 16, 2000, 100
    parities = np.empty((n_traj, n_steps // sample_every + 1))
    products = np.empty_like(parities)
    for k in range(n_traj):
        wf = init_coherent(SMALL, x0, 0.0, 0.5, 0.5)
        st = NoiseStream(31, k, 0, NoiseStream.TRUTH)
        rep = parity_report(SMALL, wf)
        parities[k, 0], products[k, 0] = rep.parity, rep.product
        for i in range(1, n_steps + 1):
            eng.sse_step(wf, 1.0, st)
            eng.apply_absorber(wf)
            if i % sample_every == 0:
                rep = parity_report(SMALL, wf)
                parities[k, i // sample_every] = rep.parity
                products[k, i // sample_every] = rep.product
    return parities, products


class TestMeasuredParityEnsemble:
    def test_mean_parity_unbiased(self, parity_runs):
        # the parity diffusion has no drift: the ensemble mean stays
        # within 3 standard errors of zero at every sampled time
        parities, _ = parity_runs
        n = parities.shape[0]
        mean = parities.mean(axis=0)
        sem = parities.std(axis=0, ddof=1) / math.sqrt(n)
        assert np.all(np.abs(mean) <= 3.0 * np.maximum(sem, 1e-3))

    def test_mean_product_damps(self, parity_runs):
        # ⟨P₊⟩⟨P₋⟩ decays pathwise in the continuous limit; assert the
        # ensemble mean is non-increasing (small tolerance for sampling)
        _, products = parity_runs
        mean = products.mean(axis=0)
        assert mean[0] == pytest.approx(0.25, abs=1e-3)
        assert np.all(np.diff(mean) <= 0.02)
        assert mean[-1] < mean[0]


class TestEnsembleStats:
    def test_identical_records_zero_sem(self):
        t = np.linspace(0, 1, 11)
        v = np.sin(t)
        stats = ensemble_stats([(t, v), (t, v), (t, v)])
        assert np.allclose(stats.mean, v)
        assert np.allclose(stats.sem, 0.0)
        assert stats.n == 3

    def test_two_records_mean_is_midpoint(self):
        t = np.arange(4.0)
        stats = ensemble_stats([(t, t * 0 + 1.0), (t, t * 0 + 3.0)])
        assert np.allclose(stats.mean, 2.0)
        assert np.allclose(stats.sem, 1.0)  # std([1,3], ddof=1)/√2 = 1

    def test_sem_scales_with_sqrt_n(self):
        rng = np.random.default_rng(7)
        t = np.zeros(1)
        records = [(t, rng.standard_normal(1)) for _ in range(256)]
        stats = ensemble_stats(records)
        assert stats.sem[0] == pytest.approx(1.0 / 16.0, rel=0.25)

    def test_window_statistic(self):
        t = np.linspace(0, 10, 101)
        records = [(t, np.full_like(t, v)) for v in (1.0, 2.0, 3.0)]
        stats = ensemble_stats(records, window=(9.0, 10.0))
        assert stats.window_mean == pytest.approx(2.0)
        assert stats.window_sem == pytest.approx(1.0 / math.sqrt(3.0))

    def test_empty_window_rejected(self):
        t = np.linspace(0, 1, 5)
        with pytest.raises(ParameterError):
            ensemble_stats([(t, t), (t, t)], window=(5.0, 6.0))

    def test_mismatched_time_grids_rejected(self):
        t1 = np.linspace(0, 1, 5)
        t2 = np.linspace(0, 1, 6)
        with pytest.raises(ParameterError):
            ensemble_stats([(t1, t1), (t2, t2)])

    def test_single_record_rejected(self):
        t = np.linspace(0, 1, 5)
        with pytest.raises(ParameterError):
            ensemble_stats([(t, t)])

    def test_accepts_record_objects(self):
        class Rec:
            def __init__(self, times, values):
                self.times = times
                self.values = values

        t = np.linspace(0, 1, 5)
        stats = ensemble_stats([Rec(t, t), Rec(t, 3 * t)])
        assert np.allclose(stats.mean, 2 * t)
