"""Approximate Gaussian estimator driven by the homodyne photocurrent.

The observer propagates five numbers — position and momentum centroids
⟨X⟩e, ⟨P⟩e, the variances V_X^e, V_P^e, and the symmetrized covariance
C_e — as a Gaussian approximation to the conditioned atomic state. It is
driven by the innovation ΔW_e reconstructed from the measured photocurrent
increment Δr̃; when the estimate matches the true state at unit detection
efficiency, ΔW_e coincides with the measurement noise itself.

Two integration forms are provided:

``step_reference``
    Plain Euler on the five moment equations, evaluating sin/cos/exp fresh
    each step. Euler is the mandated scheme here: the innovation is only a
    Wiener increment when the estimate is faithful, so higher strong-order
    schemes have no formal advantage.
``step_fast``
    The transcendental-free reduced form in the seven variables
    ``x1 = sin(2k̃⟨X⟩e)``, ``x2 = cos(2k̃⟨X⟩e)``, ``x3 = ⟨P⟩e/k̃``,
    ``x4 = 2k̃²V_X^e``, ``x5 = exp(−x4)``, ``x6 = V_P^e/k̃²``, ``x7 = C_e``.
    x3, x4, x6, x7 update by Euler; x1, x2 by a rotation through the
    centroid increment with polynomial-truncated cos/sin (order 2 or 4)
    followed by the first-order renormalization ``(3 − (x1²+x2²))/2``;
    x5 multiplicatively by the truncated exponential of −Δx4. Per tick it
    costs a handful of multiplies — cheap enough for a real-time loop.

Because the Gaussian ansatz is only approximate, the filter occasionally
walks into unphysical territory. ``check_and_reset`` detects the four
conditions (negative variances, uncertainty area below 1/4, extreme
delocalization) and resets the second moments to the default
``V_X^e = V_P^e = 1/√2, C_e = 0`` while leaving the centroids untouched,
keeping a per-condition count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

from .errors import (
    EstimatorStateError,
    EstimatorUndrivenError,
    ParameterError,
)

__all__ = [
    "RESET_VARIANCE",
    "AREA_MIN",
    "V_BIG",
    "ResetCounts",
    "GaussianEstimate",
    "FastEstimate",
    "initial_estimate",
    "reconstruct_dwe",
    "step_reference",
    "step_fast",
    "check_and_reset",
    "purity",
    "to_fast",
    "to_reference",
]

_PI = math.pi

#: Variance value installed by a reset (V_X^e = V_P^e = 1/√2, C_e = 0).
RESET_VARIANCE = 1.0 / math.sqrt(2.0)
#: Resets fire when the uncertainty area A_e = √(V_X V_P − C²) drops below
#: this (checked in squared form so a negative discriminant also triggers).
AREA_MIN = 0.25
_AREA_SQ_MIN = AREA_MIN * AREA_MIN
#: Delocalization threshold: a position variance several well widths wide
#: means the filter has lost the atom and should start over.
V_BIG = 25.0

#: Reset-condition flags, in the priority order they are checked.
_FLAG_VX_NEGATIVE = "vx_negative"
_FLAG_VP_NEGATIVE = "vp_negative"
_FLAG_AREA_SMALL = "area_small"
_FLAG_VX_LARGE = "vx_large"
_FLAG_NON_FINITE = "non_finite"


@dataclass(slots=True)
class ResetCounts:
    """How many times each unphysical condition has fired."""

    vx_negative: int = 0
    vp_negative: int = 0
    area_small: int = 0
    vx_large: int = 0
    non_finite: int = 0

    @property
    def total(self) -> int:
        return (
            self.vx_negative
            + self.vp_negative
            + self.area_small
            + self.vx_large
            + self.non_finite
        )

    def as_dict(self) -> dict[str, int]:
        return {
            _FLAG_VX_NEGATIVE: self.vx_negative,
            _FLAG_VP_NEGATIVE: self.vp_negative,
            _FLAG_AREA_SMALL: self.area_small,
            _FLAG_VX_LARGE: self.vx_large,
            _FLAG_NON_FINITE: self.non_finite,
        }


@dataclass(slots=True)
class GaussianEstimate:
    """The five-variable Gaussian estimate, in scaled units.

    ``ktilde`` and ``eta`` ride along as configuration: the wavenumber
    enters every trigonometric factor and the detection efficiency every
    information-gain term, and neither changes during a run.
    """

    x: float
    p: float
    vx: float
    vp: float
    cov: float
    ktilde: float
    eta: float = 1.0
    resets: ResetCounts = field(default_factory=ResetCounts)

    @property
    def area_sq(self) -> float:
        """Squared uncertainty area A_e² = V_X^e V_P^e − C_e²."""
        return self.vx * self.vp - self.cov * self.cov

    @property
    def expected_cos2k(self) -> float:
        """The estimate's expectation of cos(2k̃X):
        exp(−2k̃²V_X^e)·cos(2k̃⟨X⟩e)."""
        return math.exp(-2.0 * self.ktilde**2 * self.vx) * math.cos(
            2.0 * self.ktilde * self.x
        )

    @property
    def trigger(self) -> float:
        """Feedback trigger signal −⟨cos(2k̃X)⟩e."""
        return -self.expected_cos2k

    def copy(self) -> "GaussianEstimate":
        return replace(self, resets=replace(self.resets))


@dataclass(slots=True)
class FastEstimate:
    """The reduced seven-variable form of the Gaussian estimate."""

    x1: float
    x2: float
    x3: float
    x4: float
    x5: float
    x6: float
    x7: float
    ktilde: float
    eta: float = 1.0
    resets: ResetCounts = field(default_factory=ResetCounts)

    @property
    def area_sq(self) -> float:
        """A_e² in reduced variables: x4·x6/2 − x7²."""
        return 0.5 * self.x4 * self.x6 - self.x7 * self.x7

    @property
    def expected_cos2k(self) -> float:
        """⟨cos(2k̃X)⟩e = x5·x2."""
        return self.x5 * self.x2

    @property
    def trigger(self) -> float:
        return -self.expected_cos2k

    def copy(self) -> "FastEstimate":
        return replace(self, resets=replace(self.resets))


def initial_estimate(
    ktilde: float,
    *,
    eta: float = 1.0,
    x: float = 6.0,
    p: float = 0.0,
    vx: float = RESET_VARIANCE,
    vp: float = RESET_VARIANCE,
    cov: float = 0.0,
) -> GaussianEstimate:
    """The default starting estimate: a slightly mixed Gaussian at ⟨X⟩e=6.

    The variances start at the reset value 1/√2 rather than the pure-state
    1/2 — the observer should not claim more knowledge than it has.
    """
    if ktilde <= 0.0:
        raise ParameterError(f"ktilde must be positive, got {ktilde!r}")
    if not 0.0 < eta <= 1.0:
        if eta <= 0.0:
            raise EstimatorUndrivenError(
                f"detection efficiency eta={eta!r}: the photocurrent carries "
                "no information and the filter cannot run"
            )
        raise ParameterError(f"eta must lie in (0, 1], got {eta!r}")
    if vx <= 0.0 or vp <= 0.0:
        raise ParameterError(
            f"initial variances must be positive, got vx={vx!r}, vp={vp!r}"
        )
    return GaussianEstimate(
        x=x, p=p, vx=vx, vp=vp, cov=cov, ktilde=ktilde, eta=eta
    )


def reconstruct_dwe(
    dr: float,
    est: GaussianEstimate | FastEstimate,
    gamma_t: float,
    eta: float,
    dt: float,
) -> float:
    """Innovation ΔW_e from one photocurrent increment.

        ΔW_e = Δr̃/√η + √(2ηΓ_t)·[1 + exp(−2k̃²V_X^e)cos(2k̃⟨X⟩e)]·Δt

    Everything on the right is available to the observer. When the estimate
    matches the true state the deterministic parts cancel against the
    photocurrent drift and ΔW_e reduces to the (rescaled) measurement
    noise; any mismatch leaves a bias that drags the estimate toward the
    truth.
    """
    if eta <= 0.0:
        raise EstimatorUndrivenError(
            f"detection efficiency eta={eta!r}: the photocurrent carries no "
            "information and the filter cannot run"
        )
    bracket = 1.0 + est.expected_cos2k
    return dr / math.sqrt(eta) + math.sqrt(2.0 * eta * gamma_t) * bracket * dt


def step_reference(
    est: GaussianEstimate,
    dwe: float,
    dt: float,
    gamma_t: float,
    vmax_t: float,
) -> GaussianEstimate:
    """One Euler update of the five moment equations (in place).

    All right-hand sides are evaluated at the pre-step state; ``gamma_t``
    and ``vmax_t`` are the control-scaled measurement strength and lattice
    depth for this tick.
    """
    k = est.ktilde
    k2 = k * k
    eta = est.eta
    x, p, vx, vp, cov = est.x, est.p, est.vx, est.vp, est.cov

    s = math.sin(2.0 * k * x)
    c = math.cos(2.0 * k * x)
    e1 = math.exp(-2.0 * k2 * vx)
    e2 = e1 * e1
    e4 = e2 * e2
    eg8 = 8.0 * eta * gamma_t
    root8 = math.sqrt(eg8)
    root2 = math.sqrt(2.0 * eta * gamma_t)
    s2 = s * s

    dx = 2.0 * _PI * p * dt + root8 * k * vx * e1 * s * dwe
    dp = -vmax_t * k * e1 * s * dt + root8 * k * cov * e1 * s * dwe
    dvx = (
        4.0 * _PI * cov * dt
        - eg8 * k2 * vx * vx * e2 * s2 * dt
        + 2.0 * root8 * k2 * vx * vx * e1 * c * dwe
    )
    dvp = (
        -4.0 * vmax_t * k2 * cov * e1 * c
        + gamma_t * k2 * (1.0 - e4 * (2.0 * c * c - 1.0))
        - eg8 * k2 * cov * cov * e2 * s2
    ) * dt - root2 * k2 * (1.0 - 4.0 * (cov * cov + k2 * vx) * e1) * c * dwe
    dcov = (
        2.0 * _PI * vp
        - 2.0 * vmax_t * k2 * vx * e1 * c
        - eg8 * k2 * vx * cov * e2 * s2
    ) * dt + 2.0 * root8 * k2 * vx * cov * e1 * c * dwe

    est.x = x + dx
    est.p = p + dp
    est.vx = vx + dvx
    est.vp = vp + dvp
    est.cov = cov + dcov
    return est


def step_fast(
    fast: FastEstimate,
    dwe: float,
    dt: float,
    gamma_t: float,
    vmax_t: float,
    order: int = 4,
) -> FastEstimate:
    """One stabilized update of the reduced form (in place).

    x3, x4, x6, x7 advance by Euler. The pair (x1, x2) advances by an exact
    rotation through the centroid increment 2k̃Δ⟨X⟩e with cos/sin replaced
    by their Taylor truncation at the given ``order`` (2 or 4), after which
    both are multiplied by ``(3 − (x1²+x2²))/2`` — the first-order
    restoration of the unit circle. x5 is multiplied by the same-order
    truncation of exp(−Δx4), keeping it glued to exp(−x4) without ever
    calling a transcendental.
    """
    if order not in (2, 4):
        raise ParameterError(f"truncation order must be 2 or 4, got {order!r}")
    k2 = fast.ktilde * fast.ktilde
    eta = fast.eta
    x1, x2, x3 = fast.x1, fast.x2, fast.x3
    x4, x5, x6, x7 = fast.x4, fast.x5, fast.x6, fast.x7

    eg = eta * gamma_t
    root8 = math.sqrt(8.0 * eg)
    root2 = math.sqrt(2.0 * eg)
    s2 = x1 * x1
    x5sq = x5 * x5

    dtheta = 4.0 * _PI * k2 * x3 * dt + root8 * x1 * x4 * x5 * dwe
    dx3 = -vmax_t * x1 * x5 * dt + root8 * x1 * x5 * x7 * dwe
    dx4 = (
        8.0 * _PI * k2 * x7 - 4.0 * eg * s2 * x4 * x4 * x5sq
    ) * dt + root8 * x2 * x4 * x4 * x5 * dwe
    dx6 = (
        -4.0 * vmax_t * x2 * x5 * x7
        + gamma_t * (1.0 + x5sq * x5sq * (1.0 - 2.0 * x2 * x2))
        - 8.0 * eg * s2 * x5sq * x7 * x7
    ) * dt - root2 * (1.0 - 2.0 * (x4 + 2.0 * x7 * x7) * x5) * x2 * dwe
    dx7 = (
        2.0 * _PI * k2 * x6
        - vmax_t * x2 * x4 * x5
        - 4.0 * eg * s2 * x4 * x5sq * x7
    ) * dt + root8 * x2 * x4 * x5 * x7 * dwe

    th2 = dtheta * dtheta
    u = -dx4
    if order == 4:
        ct = 1.0 - 0.5 * th2 + th2 * th2 / 24.0
        st = dtheta * (1.0 - th2 / 6.0)
        eu = 1.0 + u * (1.0 + u * (0.5 + u * (1.0 / 6.0 + u / 24.0)))
    else:
        ct = 1.0 - 0.5 * th2
        st = dtheta
        eu = 1.0 + u * (1.0 + 0.5 * u)

    x1n = x1 * ct + x2 * st
    x2n = x2 * ct - x1 * st
    norm_sq = x1n * x1n + x2n * x2n
    fix = 0.5 * (3.0 - norm_sq)

    fast.x1 = x1n * fix
    fast.x2 = x2n * fix
    fast.x3 = x3 + dx3
    fast.x4 = x4 + dx4
    fast.x5 = x5 * eu
    fast.x6 = x6 + dx6
    fast.x7 = x7 + dx7
    return fast


def _reset_reference(est: GaussianEstimate) -> None:
    est.vx = RESET_VARIANCE
    est.vp = RESET_VARIANCE
    est.cov = 0.0


def _reset_fast(fast: FastEstimate) -> None:
    k2 = fast.ktilde * fast.ktilde
    fast.x4 = 2.0 * k2 * RESET_VARIANCE
    fast.x5 = math.exp(-fast.x4)
    fast.x6 = RESET_VARIANCE / k2
    fast.x7 = 0.0


def check_and_reset(
    est: GaussianEstimate | FastEstimate,
) -> str | None:
    """Detect an unphysical filter state and reset the second moments.

    The four conditions, in the order checked: V_X^e < 0, V_P^e < 0,
    uncertainty area A_e < 1/4 (evaluated as A_e² < 1/16, which also
    catches a negative discriminant), and V_X^e > V_BIG (the filter has
    delocalized over many wells). A reset installs V_X^e = V_P^e = 1/√2,
    C_e = 0 and leaves the centroids untouched; the matching counter is
    incremented and the condition name returned (``None`` when healthy).
    Only the first matching condition is attributed, so the per-condition
    statistics stay exclusive.

    Non-finite second moments (a blown-up integration step) also reset,
    under the ``non_finite`` flag; non-finite centroids cannot be repaired
    without inventing a position, so they raise ``EstimatorStateError`` —
    the caller should restart the trajectory.
    """
    if isinstance(est, FastEstimate):
        centered = math.isfinite(est.x1) and math.isfinite(est.x2) and (
            math.isfinite(est.x3)
        )
        if not centered:
            raise EstimatorStateError(
                "estimator centroid is non-finite; the trajectory cannot "
                "be continued"
            )
        second_ok = (
            math.isfinite(est.x4)
            and math.isfinite(est.x5)
            and math.isfinite(est.x6)
            and math.isfinite(est.x7)
        )
        if not second_ok:
            _reset_fast(est)
            est.resets.non_finite += 1
            return _FLAG_NON_FINITE
        k2 = est.ktilde * est.ktilde
        if est.x4 < 0.0:
            _reset_fast(est)
            est.resets.vx_negative += 1
            return _FLAG_VX_NEGATIVE
        if est.x6 < 0.0:
            _reset_fast(est)
            est.resets.vp_negative += 1
            return _FLAG_VP_NEGATIVE
        if est.area_sq < _AREA_SQ_MIN:
            _reset_fast(est)
            est.resets.area_small += 1
            return _FLAG_AREA_SMALL
        if est.x4 > 2.0 * k2 * V_BIG:
            _reset_fast(est)
            est.resets.vx_large += 1
            return _FLAG_VX_LARGE
        return None

    if not (math.isfinite(est.x) and math.isfinite(est.p)):
        raise EstimatorStateError(
            "estimator centroid is non-finite; the trajectory cannot be "
            "continued"
        )
    if not (
        math.isfinite(est.vx)
        and math.isfinite(est.vp)
        and math.isfinite(est.cov)
    ):
        _reset_reference(est)
        est.resets.non_finite += 1
        return _FLAG_NON_FINITE
    if est.vx < 0.0:
        _reset_reference(est)
        est.resets.vx_negative += 1
        return _FLAG_VX_NEGATIVE
    if est.vp < 0.0:
        _reset_reference(est)
        est.resets.vp_negative += 1
        return _FLAG_VP_NEGATIVE
    if est.area_sq < _AREA_SQ_MIN:
        _reset_reference(est)
        est.resets.area_small += 1
        return _FLAG_AREA_SMALL
    if est.vx > V_BIG:
        _reset_reference(est)
        est.resets.vx_large += 1
        return _FLAG_VX_LARGE
    return None


def purity(est: GaussianEstimate | FastEstimate) -> float:
    """Purity of the Gaussian estimate, Tr[ρ_e²] = 1/(2A_e)."""
    a2 = est.area_sq
    if a2 <= 0.0:
        raise EstimatorStateError(
            f"uncertainty area is not positive (A_e² = {a2!r}); "
            "run check_and_reset before asking for purity"
        )
    return 1.0 / (2.0 * math.sqrt(a2))


def to_fast(est: GaussianEstimate) -> FastEstimate:
    """Map the five-variable estimate into the reduced form."""
    k = est.ktilde
    k2 = k * k
    x4 = 2.0 * k2 * est.vx
    return FastEstimate(
        x1=math.sin(2.0 * k * est.x),
        x2=math.cos(2.0 * k * est.x),
        x3=est.p / k,
        x4=x4,
        x5=math.exp(-x4),
        x6=est.vp / k2,
        x7=est.cov,
        ktilde=k,
        eta=est.eta,
        resets=replace(est.resets),
    )


def to_reference(
    fast: FastEstimate, x_near: float | None = None
) -> GaussianEstimate:
    """Map the reduced form back to moments.

    The centroid is only defined modulo one well period π/k̃ in the reduced
    variables; pass ``x_near`` to pick the branch closest to a known
    position (for comparison against the reference filter).
    """
    k = fast.ktilde
    k2 = k * k
    x = math.atan2(fast.x1, fast.x2) / (2.0 * k)
    if x_near is not None:
        period = _PI / k
        x += period * round((x_near - x) / period)
    return GaussianEstimate(
        x=x,
        p=fast.x3 * k,
        vx=fast.x4 / (2.0 * k2),
        vp=fast.x6 * k2,
        cov=fast.x7,
        ktilde=k,
        eta=fast.eta,
        resets=replace(fast.resets),
    )
