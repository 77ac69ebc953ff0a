"""Unit tests for the deterministic noise streams."""

import math

import numpy as np
import pytest

from cavitycool.errors import ParameterError
from cavitycool.noise import (
    JumpSample,
    NoiseStream,
    next_wiener,
    sample_jump,
    sample_recoil,
    split_measured,
)


class TestNextWiener:
    def test_moments(self):
        stream = NoiseStream(base_seed=12345)
        dt = 5e-4
        n = 10**6
        draws = next_wiener(stream, dt, size=n)
        assert abs(draws.mean()) < 4 * math.sqrt(dt / n)
        assert draws.var() == pytest.approx(dt, rel=1e-2)

    def test_deterministic_replay(self):
        a = next_wiener(NoiseStream(7, trajectory=3), 1e-3, size=1000)
        b = next_wiener(NoiseStream(7, trajectory=3), 1e-3, size=1000)
        assert np.array_equal(a, b)

    def test_streams_differ_by_any_key_part(self):
        base = next_wiener(NoiseStream(7, 1, 0, 0), 1e-3, size=100)
        for other in (
            NoiseStream(8, 1, 0, 0),
            NoiseStream(7, 2, 0, 0),
            NoiseStream(7, 1, 1, 0),
            NoiseStream(7, 1, 0, 1),
        ):
            assert not np.array_equal(base, next_wiener(other, 1e-3, size=100))

    def test_trajectory_streams_uncorrelated(self):
        n = 10**6
        a = NoiseStream(99, trajectory=0).normal(n)
        b = NoiseStream(99, trajectory=1).normal(n)
        corr = float(np.dot(a, b) / n)
        assert abs(corr) < 4 / math.sqrt(n)

    def test_invalid_dt(self):
        with pytest.raises(ParameterError):
            next_wiener(NoiseStream(1), 0.0)
        with pytest.raises(ParameterError):
            next_wiener(NoiseStream(1), -1e-3)


class TestSplitMeasured:
    def test_full_efficiency_degenerates(self):
        s = split_measured(0.37, -0.11, eta=1.0)
        assert s.dW_eta == 0.37
        assert s.dW_unm == 0.0

    def test_zero_efficiency_measures_nothing(self):
        s = split_measured(0.37, -0.11, eta=0.0)
        assert s.dW_eta == 0.0
        assert s.dW_unm == 0.37

    def test_exact_additivity_scalar_and_array(self):
        rng = np.random.default_rng(5)
        for eta in (0.0, 0.3, 0.8, 1.0):
            for _ in range(100):
                dW, dW_aux = rng.standard_normal(2) * 0.02
                s = split_measured(dW, dW_aux, eta)
                assert s.dW_eta + s.dW_unm == s.dW  # bitwise
                # recombination error bounded by rounding at the scale of
                # the larger component
                assert abs(s.dW - dW) <= 2 * np.spacing(
                    max(abs(dW), abs(s.dW_eta))
                )
        dW = rng.standard_normal(1000) * 0.02
        aux = rng.standard_normal(1000) * 0.02
        s = split_measured(dW, aux, 0.4)
        assert np.array_equal(s.dW_eta + s.dW_unm, s.dW)
        bound = 2 * np.spacing(np.maximum(np.abs(dW), np.abs(s.dW_eta)))
        assert np.all(np.abs(s.dW - dW) <= bound)

    def test_full_efficiency_passthrough_bitwise(self):
        dW = float(np.float64(0.123456789e-2))
        s = split_measured(dW, -0.5, eta=1.0)
        assert s.dW == dW and s.dW_eta == dW and s.dW_unm == 0.0

    def test_measured_variance(self):
        dt = 1e-3
        n = 10**6
        eta = 0.5
        stream_w = NoiseStream(11, stream=NoiseStream.TRUTH)
        stream_a = NoiseStream(11, stream=NoiseStream.AUX)
        s = split_measured(
            next_wiener(stream_w, dt, n), next_wiener(stream_a, dt, n), eta
        )
        assert s.dW_eta.var() == pytest.approx(eta * dt, rel=1e-2)

    def test_measured_covariance_with_full(self):
        dt = 1e-3
        n = 10**6
        eta = 0.7
        dW = next_wiener(NoiseStream(13, stream=0), dt, n)
        aux = next_wiener(NoiseStream(13, stream=1), dt, n)
        s = split_measured(dW, aux, eta)
        cov = float(np.mean(s.dW_eta * s.dW))
        # E[dW_eta·dW] = η·dt; Monte-Carlo standard error ≈ √(2η²+η(1-η))·dt/√n
        assert cov == pytest.approx(eta * dt, abs=5 * dt / math.sqrt(n))

    def test_out_of_range_eta(self):
        with pytest.raises(ParameterError):
            split_measured(0.1, 0.1, 1.1)
        with pytest.raises(ParameterError):
            split_measured(0.1, 0.1, -0.01)


class TestSampleJump:
    def test_zero_rate_never_occurs(self):
        stream = NoiseStream(3, stream=NoiseStream.JUMP)
        for _ in range(1000):
            s = sample_jump(stream, 0.0, 1e-3, ktilde=0.155)
            assert s == JumpSample(occurred=False, recoil=None)

    def test_poisson_statistics(self):
        stream = NoiseStream(21, stream=NoiseStream.JUMP)
        n = 10**6
        p = 1e-3
        jumps = sum(
            sample_jump(stream, 1.0, p, ktilde=0.155).occurred for _ in range(n)
        )
        expected = n * p
        assert abs(jumps - expected) < 4 * math.sqrt(expected)

    def test_recoil_support(self):
        ktilde = 0.155
        stream = NoiseStream(4, stream=NoiseStream.JUMP)
        recoils = []
        while len(recoils) < 200:
            s = sample_jump(stream, 1.0, 0.05, ktilde)
            if s.occurred:
                recoils.append(s.recoil)
        assert all(-ktilde <= u <= ktilde for u in recoils)

    def test_recoil_distribution_moments(self):
        ktilde = 0.155
        n = 20000
        stream = NoiseStream(6, stream=NoiseStream.JUMP)
        uni = np.array([sample_recoil(stream, ktilde, "uniform") for _ in range(n)])
        dip = np.array([sample_recoil(stream, ktilde, "dipole") for _ in range(n)])
        # E[u²] = k̃²/3 (uniform) and 2k̃²/5 (dipole pattern ∝ 1+(u/k̃)²)
        assert uni.var() == pytest.approx(ktilde**2 / 3, rel=0.05)
        assert dip.var() == pytest.approx(0.4 * ktilde**2, rel=0.05)
        assert np.all(np.abs(dip) <= ktilde)

    def test_large_probability_warns(self):
        stream = NoiseStream(5, stream=NoiseStream.JUMP)
        with pytest.warns(UserWarning, match="unreliable"):
            sample_jump(stream, 300.0, 1e-3, ktilde=0.155)

    def test_invalid_inputs(self):
        stream = NoiseStream(5)
        with pytest.raises(ParameterError):
            sample_jump(stream, -1.0, 1e-3, ktilde=0.155)
        with pytest.raises(ParameterError):
            sample_jump(stream, 1.0, 0.0, ktilde=0.155)
        with pytest.raises(ParameterError):
            sample_recoil(stream, 0.155, "isotropic3d")
