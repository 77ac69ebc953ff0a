"""Tests for the sliding-window quadratic fit and the switching policies."""

import math
from dataclasses import dataclass

import numpy as np
import pytest

from cavitycool import ControlLevel, ParameterError
from cavitycool.controller import (
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

KTILDE = 0.155


@dataclass
class FakeEstimate:
    """Minimal stand-in for the Gaussian estimator state."""

    x: float = 0.0
    p: float = 0.0
    vx: float = 0.5
    ktilde: float = KTILDE


def window_times(q):
    """Sample times of a full window, newest first: 0, -1, ..., 1-q."""
    return -np.arange(q, dtype=float)


def fill_fit(fit, values):
    for y in values:
        quadfit_push(fit, y)
    return fit


def lstsq_slope(values, d=0):
    """Oracle: quadratic least squares via an explicit Vandermonde solve."""
    q = len(values)
    # values arrive oldest first; the last one is the newest sample at t=0
    t = np.arange(1 - q, 1, dtype=float)
    V = np.vander(t, 3, increasing=True)  # columns 1, t, t^2
    coeffs, *_ = np.linalg.lstsq(V, np.asarray(values, dtype=float), rcond=None)
    return coeffs[1] + 2.0 * coeffs[2] * d


class TestQuadFitState:
    def test_exact_quadratic_recovered(self):
        # least squares through exact quadratic data reproduces it exactly
        rng = np.random.default_rng(7)
        for q in (3, 5, 30, 300):
            a0, a1, a2 = rng.normal(size=3)
            fit = QuadFitState(q)
            # oldest sample first, newest (t=0) last
            for t in window_times(q)[::-1]:
                fit.push(a0 + a1 * t + a2 * t * t)
            assert quadfit_slope(fit) == pytest.approx(a1, rel=1e-9, abs=1e-9)
            for d in (1, 3, 10):
                assert quadfit_slope(fit, d) == pytest.approx(
                    a1 + 2 * a2 * d, rel=1e-9, abs=1e-9
                )

    def test_incremental_sums_match_direct_at_every_push(self):
        # the O(1) recurrences track direct summation everywhere, including
        # while the window is still filling and across wrap-around
        rng = np.random.default_rng(11)
        fit = QuadFitState(q=17, refresh_every=10**9)  # refresh disabled
        for y in rng.normal(size=100):
            fit.push(y)
            s0, s1, s2 = fit.direct_sums()
            assert fit.S0 == pytest.approx(s0, abs=1e-9)
            assert fit.S1 == pytest.approx(s1, abs=1e-9)
            assert fit.S2 == pytest.approx(s2, abs=1e-9)

    def test_million_push_drift(self):
        rng = np.random.default_rng(13)
        fit = QuadFitState(q=300)
        for block in range(100):
            for y in rng.normal(size=10_000):
                fit.push(y)
        s0, s1, s2 = fit.direct_sums()
        scale = max(1.0, abs(s0), abs(s1), abs(s2))
        assert abs(fit.S0 - s0) / scale < 1e-6
        assert abs(fit.S1 - s1) / scale < 1e-6
        assert abs(fit.S2 - s2) / scale < 1e-6

    def test_slope_matches_explicit_solve(self):
        rng = np.random.default_rng(17)
        for q in (3, 7, 50, 300):
            values = rng.normal(size=q)
            fit = fill_fit(QuadFitState(q), values)
            for d in (0, 2, 5):
                assert quadfit_slope(fit, d) == pytest.approx(
                    lstsq_slope(values, d), rel=1e-6, abs=1e-6
                )

    def test_window_not_full_gives_no_decision(self):
        fit = QuadFitState(q=5)
        for y in (1.0, 2.0, 3.0, 4.0):
            fit.push(y)
            assert quadfit_slope(fit) is None
            assert decide_improved(fit) is None
        fit.push(5.0)
        assert quadfit_slope(fit) is not None

    def test_constant_window_slope_is_zero(self):
        fit = fill_fit(QuadFitState(q=5), [1.0] * 5)
        assert quadfit_slope(fit) == 0.0
        assert decide_improved(fit) is None  # exact zero slope: hold

    def test_validation(self):
        with pytest.raises(ParameterError):
            QuadFitState(q=2)
        with pytest.raises(ParameterError):
            QuadFitState(q=5, refresh_every=0)
        fit = fill_fit(QuadFitState(q=3), [0.0, 1.0, 2.0])
        with pytest.raises(ParameterError):
            quadfit_slope(fit, d=-1)

    def test_len_and_full(self):
        fit = QuadFitState(q=4)
        assert len(fit) == 0 and not fit.full
        fill_fit(fit, [1.0, 2.0, 3.0, 4.0, 5.0])
        assert len(fit) == 4 and fit.full


class TestDecisions:
    def test_scale_and_offset_invariance(self):
        # decisions depend only on the trend, not on gain or baseline
        rng = np.random.default_rng(23)
        for _ in range(20):
            values = rng.normal(size=11)
            scale = rng.uniform(0.1, 50.0)
            offset = rng.normal() * 10.0
            base = fill_fit(QuadFitState(11), values)
            transformed = fill_fit(QuadFitState(11), scale * values + offset)
            assert decide_improved(base) == decide_improved(transformed)

    def test_rising_high_falling_low(self):
        rising = fill_fit(QuadFitState(3), [0.0, 1.0, 2.0])
        falling = fill_fit(QuadFitState(3), [2.0, 1.0, 0.0])
        assert decide_improved(rising) is ControlLevel.HIGH
        assert decide_improved(falling) is ControlLevel.LOW

    def test_y_est_even_in_centroid(self):
        rng = np.random.default_rng(29)
        for _ in range(20):
            x = rng.uniform(-40.0, 40.0)
            vx = rng.uniform(0.1, 5.0)
            left = y_est(FakeEstimate(x=-x, vx=vx))
            right = y_est(FakeEstimate(x=x, vx=vx))
            assert left == pytest.approx(right, rel=1e-12, abs=1e-12)

    def test_y_est_limits(self):
        # narrow packet at a well bottom: strongly negative
        assert y_est(FakeEstimate(x=0.0, vx=1e-6)) == pytest.approx(-1.0, abs=1e-4)
        # at the potential maximum (half a lattice period) the sign flips
        half = math.pi / (2.0 * KTILDE)
        assert y_est(FakeEstimate(x=half, vx=1e-6)) == pytest.approx(1.0, abs=1e-4)
        # a quarter period away the signal crosses zero
        quarter = math.pi / (4.0 * KTILDE)
        assert abs(y_est(FakeEstimate(x=quarter, vx=1e-6))) < 1e-9
        # a very broad packet carries no switching information
        assert y_est(FakeEstimate(x=0.3, vx=1e3)) == pytest.approx(0.0, abs=1e-12)

    def test_decide_simple_cases(self):
        x_up = 1.0  # sin(2 k x) > 0 there
        assert decide_simple(FakeEstimate(x=x_up, p=1.0)) is ControlLevel.HIGH
        assert decide_simple(FakeEstimate(x=x_up, p=-1.0)) is ControlLevel.LOW
        assert decide_simple(FakeEstimate(x=-x_up, p=1.0)) is ControlLevel.LOW
        assert decide_simple(FakeEstimate(x=x_up, p=0.0)) is None
        assert decide_simple(FakeEstimate(x=0.0, p=1.0)) is None

    def test_decide_simple_reflection_symmetric(self):
        # the trigger p·sin(2kx) is even under (x, p) -> (-x, -p)
        rng = np.random.default_rng(31)
        for _ in range(20):
            x, p = rng.normal(size=2)
            a = decide_simple(FakeEstimate(x=x, p=p))
            b = decide_simple(FakeEstimate(x=-x, p=-p))
            assert a == b

    def test_direct_matches_improved_on_noiseless_signal(self):
        # On a noiseless trajectory both triggers are positive-scale/offset
        # transforms of -cos(2 k x(t)), so every decision must coincide.
        q = 9
        dt = 0.02
        gamma = 23.6
        vx = 0.4
        fit_est = QuadFitState(q)
        fit_cur = QuadFitState(q)
        amp, omega = 5.0, 2.0
        mismatches = 0
        for n in range(400):
            x = amp * math.sin(omega * n * dt)
            cos2 = math.cos(2.0 * KTILDE * x)
            y = -math.exp(-2.0 * KTILDE**2 * vx) * cos2
            dr = -math.sqrt(8.0 * gamma) * 0.5 * (1.0 + cos2) * dt
            fit_est.push(y)
            fit_cur.push(dr)
            a = decide_improved(fit_est)
            b = decide_direct(fit_cur)
            if a != b:
                mismatches += 1
        assert mismatches == 0


class TestStaggerCombine:
    def test_single_stream_identity(self):
        stream = [0.1, 0.2, 0.3]
        assert stagger_combine([stream]) == stream

    def test_interleaving(self):
        merged = stagger_combine([[1.0, 3.0, 5.0], [2.0, 4.0, 6.0]])
        assert merged == [1.0, 2.0, 3.0, 4.0, 5.0, 6.0]

    def test_index_mapping(self):
        n_s, rounds = 3, 5
        streams = [
            [float(100 * i + r) for r in range(rounds)] for i in range(n_s)
        ]
        merged = stagger_combine(streams)
        for m, value in enumerate(merged):
            assert value == streams[m % n_s][m // n_s]

    def test_truncates_to_complete_rounds(self):
        merged = stagger_combine([[1.0, 3.0, 5.0], [2.0, 4.0]])
        assert merged == [1.0, 2.0, 3.0, 4.0]

    def test_empty_rejected(self):
        with pytest.raises(ParameterError):
            stagger_combine([])


class TestControllerState:
    def test_validation(self):
        with pytest.raises(ParameterError):
            ControllerState(policy="bogus")
        with pytest.raises(ParameterError):
            ControllerState(q=2)
        with pytest.raises(ParameterError):
            ControllerState(delay=-1)
        with pytest.raises(ParameterError):
            ControllerState(n_stagger=0)

    def test_policy_accepts_plain_string(self):
        ctrl = ControllerState(policy="simple_centroid")
        assert ctrl.policy is FeedbackPolicy.SIMPLE_CENTROID

    def test_none_policy_always_nominal(self):
        ctrl = ControllerState(policy=FeedbackPolicy.NONE, q=3, t_on=0.0)
        for n in range(10):
            level = controller_tick(ctrl, t=float(n), y=float(n))
            assert level is ControlLevel.NOMINAL

    def test_nominal_before_t_on_then_switches(self):
        ctrl = ControllerState(q=3, t_on=2.0)
        dt = 0.5
        levels = []
        for n in range(10):
            t = n * dt
            levels.append(controller_tick(ctrl, t, y=float(n)))  # rising
        # before t_on the level is pinned to Nominal ...
        assert levels[:4] == [ControlLevel.NOMINAL] * 4
        # ... but the fit warmed up during that time, so the very first
        # eligible tick already acts on the rising trend
        assert levels[4] is ControlLevel.HIGH
        assert all(lv is ControlLevel.HIGH for lv in levels[4:])

    def test_hold_on_no_decision(self):
        ctrl = ControllerState(q=3, t_on=0.0)
        # two samples: window not full, hold Nominal
        assert controller_tick(ctrl, 0.0, y=0.0) is ControlLevel.NOMINAL
        assert controller_tick(ctrl, 0.1, y=1.0) is ControlLevel.NOMINAL
        # window full and rising: High
        assert controller_tick(ctrl, 0.2, y=2.0) is ControlLevel.HIGH
        # flush the window with a constant: once it is flat the slope is
        # exactly zero and the previous level is held tick after tick
        for k in range(3):
            controller_tick(ctrl, 0.3 + 0.1 * k, y=5.0)
        held = controller_tick(ctrl, 0.7, y=5.0)
        for k in range(5):
            assert controller_tick(ctrl, 0.8 + 0.1 * k, y=5.0) is held

    def test_delay_fifo_lags_fit(self):
        ctrl = ControllerState(q=3, delay=2, t_on=0.0)
        ys = [10.0, 20.0, 30.0, 40.0, 50.0, 60.0, 70.0]
        for n, y in enumerate(ys):
            controller_tick(ctrl, float(n), y=y)
        # 7 observations pushed, the last 2 still in flight: the newest
        # sample in the fit is y[4], not y[6]
        assert ctrl.fit.values() == (30.0, 40.0, 50.0)

    def test_delayed_decision_extrapolates(self):
        # a quadratic trend peaking between the (stale) fit window and the
        # current tick: without the d-term the fit sees a rising trigger,
        # with it the decision flips to the current, falling side
        q, d = 3, 6
        ctrl = ControllerState(q=q, delay=d, t_on=0.0)
        level = None
        for n in range(q + d):
            level = controller_tick(ctrl, float(n), y=-((float(n) - 4.0) ** 2))
        # the fit holds ticks 0..2 only, rising toward the peak at tick 4
        assert ctrl.fit.values() == (-16.0, -9.0, -4.0)
        assert decide_improved(ctrl.fit, 0) is ControlLevel.HIGH
        # but the controller extrapolates d ticks ahead, past the peak
        assert level is ControlLevel.LOW

    def test_simple_policy_uses_estimate(self):
        ctrl = ControllerState(policy=FeedbackPolicy.SIMPLE_CENTROID, t_on=0.0)
        est = FakeEstimate(x=1.0, p=2.0)
        assert controller_tick(ctrl, 0.0, est=est) is ControlLevel.HIGH
        est = FakeEstimate(x=1.0, p=-2.0)
        assert controller_tick(ctrl, 0.1, est=est) is ControlLevel.LOW
        # zero trigger: hold the previous level
        est = FakeEstimate(x=0.0, p=2.0)
        assert controller_tick(ctrl, 0.2, est=est) is ControlLevel.LOW
