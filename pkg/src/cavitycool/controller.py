"""Bang-bang feedback policies and the incremental quadratic fit.

The controller watches a scalar trigger signal and switches the lattice
between a High level ``(1+ε₁)²`` and a Low level ``(1−ε₂)²`` of the nominal
depth. The physical idea: raising the potential while the atom climbs and
lowering it while the atom falls extracts energy every half oscillation.

Policies
--------
``IMPROVED_GAUSSIAN``
    Trigger on ``y_est = −exp(−2k̃²V_X^e)·cos(2k̃⟨X⟩e)`` from the Gaussian
    estimator. ``y_est`` is (minus) the estimator's expected value of
    ``cos(2k̃X)``, a quantity that is extremal exactly when the atom turns
    around, and even under reflection about a well bottom — so the policy
    works whether the estimate locks onto the true state in phase or half a
    period out of phase.
``SIMPLE_CENTROID``
    Switch High whenever the estimated centroid climbs away from the nearest
    well bottom (``⟨P⟩e·sin(2k̃⟨X⟩e) > 0``) and Low when it falls.
``DIRECT_PHOTOCURRENT``
    Skip the estimator and fit the raw integrated photocurrent instead; its
    drift is ``−√(8η²Γ)⟨cos²(k̃X)⟩`` per unit time, so the same slope sign
    rule applies to ``+Δr̃``.
``PERFECT_KNOWLEDGE``
    Trigger on ``−⟨cos(2k̃X)⟩`` of the true wavefunction — an unphysical
    but useful upper bound on estimator-based performance.
``NONE``
    Never switch (free measurement-heated evolution).

Because the trigger is noisy, the slope is extracted from a least-squares
quadratic over the last ``q`` samples, maintained in O(1) per sample by
sliding-window recurrences, and evaluated ``d`` ticks ahead to compensate
loop delay.
"""

from __future__ import annotations

import enum
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Sequence

from .errors import ParameterError
from .model import ControlLevel

__all__ = [
    "FeedbackPolicy",
    "QuadFitState",
    "ControllerState",
    "y_est",
    "quadfit_push",
    "quadfit_slope",
    "decide_improved",
    "decide_simple",
    "decide_direct",
    "stagger_combine",
    "controller_tick",
]


class FeedbackPolicy(str, enum.Enum):
    """The switching policies (string-valued, so they serialize as-is)."""

    IMPROVED_GAUSSIAN = "improved_gaussian"
    SIMPLE_CENTROID = "simple_centroid"
    DIRECT_PHOTOCURRENT = "direct_photocurrent"
    PERFECT_KNOWLEDGE = "perfect_knowledge"
    NONE = "none"


class QuadFitState:
    """Sliding-window least-squares quadratic, maintained incrementally.

    The window holds the last ``q`` samples ``y_j`` at implicit times
    ``t_j = 1 − j`` (the newest sample sits at ``t = 0``, the oldest at
    ``t = 1 − q``). The running sums

        ``S_n = Σ_j y_j · t_jⁿ``,  n = 0, 1, 2

    are updated in O(1) per push from the window-slide algebra

        ``S0' = S0 + y_new − y_dep``
        ``S1' = S1 − S0 + q·y_dep``
        ``S2' = S2 − 2·S1 + S0 − q²·y_dep``

    (pre-update values on the right; the departing-sample terms drop out
    while the window is still filling). To keep float drift from a long run
    of incremental updates below 1e-6 relative, the sums are recomputed
    directly from the buffer every ``refresh_every`` pushes.
    """

    __slots__ = ("q", "S0", "S1", "S2", "_buf", "_pushes", "_refresh_every")

    def __init__(self, q: int = 300, refresh_every: int = 1024):
        if q < 3:
            raise ParameterError(f"fit window q must be >= 3, got {q!r}")
        if refresh_every < 1:
            raise ParameterError(
                f"refresh_every must be >= 1, got {refresh_every!r}"
            )
        self.q = q
        self.S0 = 0.0
        self.S1 = 0.0
        self.S2 = 0.0
        self._buf: deque[float] = deque(maxlen=q)
        self._pushes = 0
        self._refresh_every = refresh_every

    @property
    def full(self) -> bool:
        """True once the window holds q samples."""
        return len(self._buf) == self.q

    def __len__(self) -> int:
        return len(self._buf)

    def push(self, y: float) -> None:
        """Slide the window by one sample."""
        s0, s1, s2 = self.S0, self.S1, self.S2
        buf = self._buf
        if len(buf) == self.q:
            y_dep = buf[0]
            q = self.q
            self.S0 = s0 + y - y_dep
            self.S1 = s1 - s0 + q * y_dep
            self.S2 = s2 - 2.0 * s1 + s0 - q * q * y_dep
        else:
            self.S0 = s0 + y
            self.S1 = s1 - s0
            self.S2 = s2 - 2.0 * s1 + s0
        buf.append(y)
        self._pushes += 1
        if self._pushes % self._refresh_every == 0:
            self.refresh()

    def refresh(self) -> None:
        """Recompute the running sums directly from the buffer."""
        s0 = s1 = s2 = 0.0
        # newest (rightmost) sample has t = 0, one step back t = −1, ...
        for i, y in enumerate(reversed(self._buf)):
            t = -float(i)
            s0 += y
            s1 += y * t
            s2 += y * t * t
        self.S0, self.S1, self.S2 = s0, s1, s2

    def direct_sums(self) -> tuple[float, float, float]:
        """The sums recomputed from scratch (oracle for the incremental ones)."""
        s0 = s1 = s2 = 0.0
        for i, y in enumerate(reversed(self._buf)):
            t = -float(i)
            s0 += y
            s1 += y * t
            s2 += y * t * t
        return s0, s1, s2

    def values(self) -> tuple[float, ...]:
        """Window contents, oldest first."""
        return tuple(self._buf)


def quadfit_push(fit: QuadFitState, y: float) -> QuadFitState:
    """Feed one sample into the sliding-window fit (returns the same,
    updated object for call-chaining)."""
    fit.push(y)
    return fit


def quadfit_slope(fit: QuadFitState, d: int = 0) -> float | None:
    """Slope of the fitted quadratic, extrapolated ``d`` ticks ahead.

    Returns ``a1 + 2·a2·d`` where ``a1``, ``a2`` solve the normal equations
    of the quadratic least-squares problem on the window (closed forms in
    the running sums, denominator ``D = q(q−1)(q−2)(q+1)(q+2)``). Returns
    ``None`` while the window is not yet full — the caller holds the
    previous control level on a no-decision.
    """
    if d < 0:
        raise ParameterError(f"delay d must be >= 0, got {d!r}")
    if not fit.full:
        return None
    q = float(fit.q)
    s0, s1, s2 = fit.S0, fit.S1, fit.S2
    denom = q * (q - 1.0) * (q - 2.0) * (q + 1.0) * (q + 2.0)
    a1 = (
        18.0 * (q - 1.0) * (q - 2.0) * (2.0 * q - 1.0) * s0
        + 12.0 * (16.0 * q * q - 30.0 * q + 11.0) * s1
        + 180.0 * (q - 1.0) * s2
    ) / denom
    a2 = (
        30.0 * (q - 1.0) * (q - 2.0) * s0
        + 180.0 * (q - 1.0) * s1
        + 180.0 * s2
    ) / denom
    return a1 + 2.0 * a2 * d


def y_est(est) -> float:
    """Switching signal ``−exp(−2k̃²V_X^e)·cos(2k̃⟨X⟩e)``.

    This is minus the Gaussian estimator's expectation of ``cos(2k̃X)``:
    −1 at a well bottom with a narrow packet, +1 a quarter period away, and
    0 for a very broad packet (no position information → no switching
    preference). Even in ⟨X⟩e, so in-phase and out-of-phase lock-ons drive
    identical decisions.
    """
    return -math.exp(-2.0 * est.ktilde**2 * est.vx) * math.cos(
        2.0 * est.ktilde * est.x
    )


def _sign_decision(value: float | None) -> ControlLevel | None:
    if value is None or value == 0.0:
        return None
    return ControlLevel.HIGH if value > 0.0 else ControlLevel.LOW


def decide_improved(fit: QuadFitState, d: int = 0) -> ControlLevel | None:
    """High on rising fitted trigger, Low on falling; ``None`` (hold the
    previous level) when the window is not full or the slope is exactly 0."""
    return _sign_decision(quadfit_slope(fit, d))


def decide_simple(est) -> ControlLevel | None:
    """High while the estimated centroid climbs away from the nearest well
    bottom, Low while it falls toward it; ``None`` at exactly zero."""
    return _sign_decision(
        est.p * math.sin(2.0 * est.ktilde * est.x)
    )


def decide_direct(fit: QuadFitState, d: int = 0) -> ControlLevel | None:
    """Sign rule for a fit fed with raw photocurrent increments ``+Δr̃``.

    The photocurrent drifts as ``−√(8η²Γ)⟨cos²(k̃X)⟩`` per unit time, so a
    rising ``+Δr̃`` trend means ``⟨cos²⟩`` is falling — the same situation
    in which ``y_est`` rises — and the High/Low rule carries over unchanged.
    """
    return _sign_decision(quadfit_slope(fit, d))


def stagger_combine(streams: Sequence[Sequence[float]]) -> list[float]:
    """Interleave the outputs of ``N_s`` staggered estimators.

    ``streams[i]`` holds the trigger values of the estimator that updates at
    global ticks ``i, i+N_s, i+2·N_s, ...``; the merged stream restores one
    sample per fine tick, so a single shared fit sees a full-rate signal.
    The merge runs to the last complete round.
    """
    n_s = len(streams)
    if n_s == 0:
        raise ParameterError("need at least one estimator stream")
    rounds = min(len(s) for s in streams)
    merged: list[float] = []
    for r in range(rounds):
        for i in range(n_s):
            merged.append(streams[i][r])
    return merged


@dataclass
class ControllerState:
    """Mutable per-trajectory controller: policy, timing, fit, and delay.

    ``delay`` is measured in trigger ticks: at tick ``n`` the fit consumes
    the observation from tick ``n − delay`` (a FIFO models the loop
    latency), and the slope is extrapolated forward by the same ``delay``
    so decisions refer to the current time. Feedback stays at Nominal until
    ``t_on``; the fit window warms up from t = 0 regardless.
    """

    policy: FeedbackPolicy = FeedbackPolicy.IMPROVED_GAUSSIAN
    level: ControlLevel = ControlLevel.NOMINAL
    q: int = 300
    delay: int = 0
    t_on: float = 2.0
    n_stagger: int = 1
    fit: QuadFitState | None = None
    _pending: deque = field(default_factory=deque, init=False, repr=False)

    def __post_init__(self):
        try:
            self.policy = FeedbackPolicy(self.policy)
        except ValueError as exc:
            raise ParameterError(
                f"unknown policy {self.policy!r}; expected one of "
                f"{[p.value for p in FeedbackPolicy]}"
            ) from exc
        if self.q < 3:
            raise ParameterError(f"fit window q must be >= 3, got {self.q!r}")
        if self.delay < 0:
            raise ParameterError(f"delay must be >= 0, got {self.delay!r}")
        if self.n_stagger < 1:
            raise ParameterError(
                f"n_stagger must be >= 1, got {self.n_stagger!r}"
            )
        if self.fit is None:
            self.fit = QuadFitState(self.q)


def controller_tick(
    ctrl: ControllerState,
    t: float,
    y: float | None = None,
    est=None,
) -> ControlLevel:
    """Feed one trigger observation and return the level for the next tick.

    ``y`` is the scalar trigger sample for the fit-based policies (``y_est``
    value, photocurrent increment, or true ``−⟨cos 2k̃X⟩``); ``est`` is the
    estimator state for the simple centroid policy. Decisions before
    ``t_on`` are always Nominal, but observations are consumed so the fit
    window is warm when feedback switches on.
    """
    if ctrl.policy == FeedbackPolicy.NONE:
        ctrl.level = ControlLevel.NOMINAL
        return ctrl.level

    decision: ControlLevel | None = None
    if ctrl.policy == FeedbackPolicy.SIMPLE_CENTROID:
        if est is not None:
            decision = decide_simple(est)
    else:
        if y is not None:
            ctrl._pending.append(y)
            if len(ctrl._pending) > ctrl.delay:
                ctrl.fit.push(ctrl._pending.popleft())
        decision = decide_improved(ctrl.fit, ctrl.delay)

    if t < ctrl.t_on:
        ctrl.level = ControlLevel.NOMINAL
        return ctrl.level
    if decision is not None:
        ctrl.level = decision
    return ctrl.level
