"""Closed-loop trajectory runner.

Wires the stochastic truth engine to the observer stack: each control
interval the measured photocurrent increment is reconstructed into the
filter innovation, the fast Gaussian filter advances, and the bang-bang
controller picks the lattice level for the next truth step. One function
runs a single trajectory end to end (restarting with fresh seeds when the
atom escapes through the boundary absorber) and a second maps that over an
ensemble.

Timing grid
-----------
Three clocks tick in lockstep: the truth step Δt (one SSE step of the
wavefunction), the estimator interval Δt_G (one filter update), and — with
``n_stagger`` staggered filters — the trigger interval Δt_min = Δt_G/N_s at
which *some* filter fires. Δt_min must be an integer multiple of Δt or Δt
an integer multiple of Δt_min:

* Δt_min ≥ Δt — photocurrent increments accumulate over ``steps_per_tick``
  truth steps, then one filter updates.
* Δt_min < Δt — the engine's substep count is raised to the smallest
  admissible value that makes whole substep groups line up with trigger
  boundaries, and the filter bank consumes per-group increments from the
  step result.

Control decisions take effect at truth-step boundaries in either case (the
engine holds its coefficients frozen within a step), so sub-Δt estimator
cadences sharpen the observer, not the actuator. Within one filter window
the innovation reconstruction freezes Γ_t and V_max at the control level of
the window's first trigger interval, matching the filter's own
frozen-coefficient update.

Causal ordering per trigger tick: (1) the SSE step produced ΔW, (2) the
detector splits off the measured part and forms Δr̃, (3) the active filter
consumes Δr̃, (4) the controller sees the new trigger sample, (5) the level
it returns scales V_max and Γ from the next truth step on (any configured
loop delay lives inside the controller's FIFO).
"""

from __future__ import annotations

import math
from collections import deque
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import partial

import numpy as np

from .analysis import band_basis, band_populations, parity_report
from .controller import ControllerState, FeedbackPolicy, controller_tick
from .errors import (
    EstimatorStateError,
    NumericalInstabilityError,
    ParameterError,
    TrajectoryLost,
    UndefinedParityError,
)
from .estimator import (
    ResetCounts,
    check_and_reset,
    initial_estimate,
    reconstruct_dwe,
    step_fast,
    to_fast,
    to_reference,
)
from .model import ControlLevel, ScaledParams
from .noise import NoiseStream, split_measured
from .sim_adiabatic import (
    AdiabaticEngine,
    draw_ring_ic,
    draw_uniform_ic,
    init_coherent,
    make_grid,
)

__all__ = [
    "RunSettings",
    "StepPlan",
    "TrajectoryRecord",
    "record_columns",
    "run_trajectory",
    "run_ensemble",
]

_LEVEL_CODE = {
    ControlLevel.LOW: -1.0,
    ControlLevel.NOMINAL: 0.0,
    ControlLevel.HIGH: 1.0,
}

_INIT_KINDS = ("ring", "uniform", "fixed")

_RATIO_TOL = 1e-9


def record_columns(n_bands: int) -> tuple[str, ...]:
    """Column order of a trajectory record, fixed so files are stable."""
    return (
        "t",
        "x",
        "p",
        "vx",
        "vp",
        "cov",
        "cos2k",
        "energy",
        "est_x",
        "est_p",
        "est_vx",
        "est_vp",
        "est_cov",
        "y_est",
        "r_int",
        "level",
        "parity",
        "absorbed",
        "resets_total",
        "resets_area",
        *(f"band{b}" for b in range(n_bands)),
    )


def _integer_ratio(big: float, small: float, what: str) -> int:
    """``big/small`` as an exact small integer, or a ParameterError."""
    ratio = big / small
    n = round(ratio)
    if n < 1 or abs(ratio - n) > _RATIO_TOL * max(1.0, abs(ratio)):
        raise ParameterError(
            f"{what}: {big!r} is not an integer multiple of {small!r}"
        )
    return n


@dataclass(frozen=True)
class StepPlan:
    """Integer clockwork derived from (Δt, Δt_G, N_s, t_end)."""

    n_steps: int
    steps_per_tick: int
    ticks_per_step: int
    substeps_per_half: int
    trigger_dt: float

    @property
    def group_size(self) -> int:
        """Engine substeps per trigger interval when ticks_per_step > 1."""
        return 2 * self.substeps_per_half // self.ticks_per_step


@dataclass(frozen=True)
class RunSettings:
    """Everything one closed-loop trajectory needs, seeds included.

    Detection efficiency rides on ``params.eta``; the initial filter state
    is pinned at (``est_x0``, ``est_p0``) regardless of the true draw — the
    observer does not get to peek at the initial condition.
    """

    params: ScaledParams
    n_points: int = 2048
    wells: int = 16
    dt: float = 5e-4
    dt_g: float = 5e-4
    t_end: float = 50.0
    t_on: float = 2.0
    policy: FeedbackPolicy | str = FeedbackPolicy.IMPROVED_GAUSSIAN
    q: int = 300
    delay: int = 0
    n_stagger: int = 1
    order: int = 4
    init_kind: str = "ring"
    init_x: float = 6.0
    init_p: float = 0.0
    init_radius: float = 6.0
    est_x0: float = 6.0
    est_p0: float = 0.0
    record_every: int = 20
    n_bands: int = 10
    base_seed: int = 20260816
    max_attempts: int = 5

    def __post_init__(self):
        try:
            object.__setattr__(self, "policy", FeedbackPolicy(self.policy))
        except ValueError as exc:
            raise ParameterError(
                f"unknown policy {self.policy!r}; expected one of "
                f"{[p.value for p in FeedbackPolicy]}"
            ) from exc
        for name in ("dt", "dt_g", "t_end"):
            value = getattr(self, name)
            if not (value > 0.0 and math.isfinite(value)):
                raise ParameterError(
                    f"{name} must be finite and > 0, got {value!r}"
                )
        if not (0.0 <= self.t_on < self.t_end):
            raise ParameterError(
                f"t_on must lie in [0, t_end), got t_on={self.t_on!r} "
                f"with t_end={self.t_end!r}"
            )
        if self.init_kind not in _INIT_KINDS:
            raise ParameterError(
                f"init_kind must be one of {_INIT_KINDS}, "
                f"got {self.init_kind!r}"
            )
        for name in ("record_every", "n_bands", "max_attempts"):
            value = getattr(self, name)
            if value < 1:
                raise ParameterError(f"{name} must be >= 1, got {value!r}")
        # fail fast on grid and controller configuration: both would
        # otherwise only surface once the first trajectory starts
        make_grid(self.n_points, self.wells, self.params.ktilde)
        ControllerState(
            policy=self.policy,
            q=self.q,
            delay=self.delay,
            t_on=self.t_on,
            n_stagger=self.n_stagger,
        )
        self.plan()

    def plan(self) -> StepPlan:
        """Validate and freeze the integer alignment of the three clocks."""
        n_steps = _integer_ratio(self.t_end, self.dt, "t_end vs dt")
        trigger_dt = self.dt_g / self.n_stagger
        what = (
            "dt_g vs dt"
            if self.n_stagger == 1
            else f"dt_g/n_stagger (= {trigger_dt!r}) vs dt"
        )
        if trigger_dt >= self.dt * (1.0 - _RATIO_TOL):
            steps_per_tick = _integer_ratio(trigger_dt, self.dt, what)
            ticks_per_step = 1
            substeps_per_half = 4
        else:
            steps_per_tick = 1
            ticks_per_step = _integer_ratio(self.dt, trigger_dt, what)
            substeps_per_half = 4
            while (2 * substeps_per_half) % ticks_per_step:
                substeps_per_half += 1
        return StepPlan(
            n_steps=n_steps,
            steps_per_tick=steps_per_tick,
            ticks_per_step=ticks_per_step,
            substeps_per_half=substeps_per_half,
            trigger_dt=trigger_dt,
        )


@dataclass
class TrajectoryRecord:
    """One trajectory's decimated time series plus its outcome metadata."""

    traj: int
    base_seed: int
    attempt: int
    failed: bool
    failure: str | None
    absorbed: float
    resets: ResetCounts
    columns: dict[str, np.ndarray]
    restarts_lost: int = 0
    restarts_estimator: int = 0

    @property
    def times(self) -> np.ndarray:
        return self.columns["t"]

    def summary(self) -> dict:
        """JSON-safe scalar digest (one line of the ensemble summary)."""
        out = {
            "traj": self.traj,
            "base_seed": self.base_seed,
            "attempt": self.attempt,
            "restarts_lost": self.restarts_lost,
            "restarts_estimator": self.restarts_estimator,
            "failed": self.failed,
            "failure": self.failure,
            "absorbed": None if math.isnan(self.absorbed) else self.absorbed,
            "resets": {**self.resets.as_dict(), "total": self.resets.total},
        }
        if self.columns:
            last = -1
            out["t_end"] = float(self.columns["t"][last])
            out["final_energy"] = float(self.columns["energy"][last])
            parity = float(self.columns["parity"][last])
            out["final_parity"] = None if math.isnan(parity) else parity
        else:
            out["t_end"] = None
            out["final_energy"] = None
            out["final_parity"] = None
        return out


class _RowBuffer:
    """Preallocated columnar storage for the decimated record."""

    def __init__(self, n_rows: int, n_bands: int):
        self.names = record_columns(n_bands)
        self.data = {name: np.empty(n_rows) for name in self.names}
        self.cursor = 0

    def write(self, values: dict[str, float], bands: np.ndarray) -> None:
        i = self.cursor
        for name, value in values.items():
            self.data[name][i] = value
        for b, pop in enumerate(bands):
            self.data[f"band{b}"][i] = pop
        self.cursor += 1

    def columns(self) -> dict[str, np.ndarray]:
        return {name: self.data[name][: self.cursor] for name in self.names}


def _run_attempt(settings: RunSettings, traj: int, attempt: int) -> TrajectoryRecord:
    p = settings.params
    plan = settings.plan()
    grid = make_grid(settings.n_points, settings.wells, p.ktilde)
    engine = AdiabaticEngine(
        grid, p, settings.dt, substeps_per_half=plan.substeps_per_half
    )
    basis = band_basis(grid, p.ktilde, p.vmax)
    truth = NoiseStream(settings.base_seed, traj, attempt, NoiseStream.TRUTH)
    aux = NoiseStream(settings.base_seed, traj, attempt, NoiseStream.AUX)
    init = NoiseStream(settings.base_seed, traj, attempt, NoiseStream.INIT)

    if settings.init_kind == "ring":
        x0, p0 = draw_ring_ic(init, settings.init_radius)
    elif settings.init_kind == "uniform":
        x0, p0 = draw_uniform_ic(init, p.ktilde)
    else:
        x0, p0 = settings.init_x, settings.init_p
    wf = init_coherent(grid, x0, p0, 0.5, 0.5)

    eta = p.eta
    n_stagger = settings.n_stagger
    filters = [
        to_fast(
            initial_estimate(
                p.ktilde, eta=eta, x=settings.est_x0, p=settings.est_p0
            )
        )
        for _ in range(n_stagger)
    ]
    ctrl = ControllerState(
        policy=settings.policy,
        q=settings.q,
        delay=settings.delay,
        t_on=settings.t_on,
        n_stagger=n_stagger,
    )
    policy = settings.policy
    level = ControlLevel.NOMINAL
    factor = 1.0
    sqrt_trigger_dt = math.sqrt(plan.trigger_dt)

    window: deque[tuple[float, float]] = deque(maxlen=n_stagger)
    tick_count = 0
    cum_r = 0.0

    n_rows = len(range(0, plan.n_steps, settings.record_every)) + 1
    rows = _RowBuffer(n_rows, settings.n_bands)

    def close_tick(dw: float, drift: float, cos2k_mean: float, t: float) -> float:
        """Steps 2-5 of the tick ordering; returns the next control factor."""
        nonlocal tick_count, cum_r, level
        dw_aux = float(aux.normal()) * sqrt_trigger_dt
        dr = drift + split_measured(dw, dw_aux, eta).dW_eta
        cum_r += dr
        window.append((dr, factor))
        active = filters[tick_count % n_stagger]
        tick_count += 1
        dr_win = sum(item[0] for item in window)
        factor_win = window[0][1]
        gamma_w = p.Gamma * factor_win
        vmax_w = p.vmax * factor_win
        dwe = reconstruct_dwe(dr_win, active, gamma_w, eta, settings.dt_g)
        step_fast(
            active, dwe, settings.dt_g, gamma_w, vmax_w, order=settings.order
        )
        check_and_reset(active)
        y = None
        est_arg = None
        if policy is FeedbackPolicy.IMPROVED_GAUSSIAN:
            y = active.trigger
        elif policy is FeedbackPolicy.DIRECT_PHOTOCURRENT:
            y = dr
        elif policy is FeedbackPolicy.PERFECT_KNOWLEDGE:
            y = -cos2k_mean
        elif policy is FeedbackPolicy.SIMPLE_CENTROID:
            est_arg = to_reference(active)
        level = controller_tick(ctrl, t, y=y, est=est_arg)
        return level.factor(p.epsilon1, p.epsilon2)

    def record(t: float) -> None:
        mom = engine.moments(wf)
        rec_filter = filters[(tick_count - 1) % n_stagger if tick_count else 0]
        est = to_reference(rec_filter, x_near=mom.x)
        try:
            parity = parity_report(grid, wf.psi).parity
        except UndefinedParityError:
            parity = math.nan
        rows.write(
            {
                "t": t,
                "x": mom.x,
                "p": mom.p,
                "vx": mom.vx,
                "vp": mom.vp,
                "cov": mom.cov,
                "cos2k": mom.cos2k,
                "energy": mom.energy,
                "est_x": est.x,
                "est_p": est.p,
                "est_vx": est.vx,
                "est_vp": est.vp,
                "est_cov": est.cov,
                "y_est": rec_filter.trigger,
                "r_int": cum_r,
                "level": _LEVEL_CODE[level],
                "parity": parity,
                "absorbed": wf.absorbed,
                "resets_total": sum(f.resets.total for f in filters),
                "resets_area": sum(f.resets.area_small for f in filters),
            },
            band_populations(wf.psi, basis, settings.n_bands),
        )

    acc_dw = 0.0
    acc_drift = 0.0
    acc_cos2k = 0.0
    steps_in_tick = 0
    dt = settings.dt
    dt_sub = engine.dt_sub
    gs = plan.group_size

    for step in range(plan.n_steps):
        if step % settings.record_every == 0:
            record(step * dt)
        res = engine.sse_step(wf, factor, truth)
        t_next = (step + 1) * dt
        engine.apply_absorber(wf, t_next)
        drift_coef = -math.sqrt(8.0 * eta * eta * p.Gamma * factor)
        if plan.ticks_per_step == 1:
            acc_dw += res.dw
            acc_drift += drift_coef * res.cossq_mean * dt
            acc_cos2k += 2.0 * res.cossq_mean - 1.0
            steps_in_tick += 1
            if steps_in_tick == plan.steps_per_tick:
                factor = close_tick(
                    acc_dw, acc_drift, acc_cos2k / steps_in_tick, t_next
                )
                acc_dw = acc_drift = acc_cos2k = 0.0
                steps_in_tick = 0
        else:
            t_step = step * dt
            for g in range(plan.ticks_per_step):
                seg = slice(g * gs, (g + 1) * gs)
                seg_cossq = res.sub_cossq[seg]
                new_factor = close_tick(
                    float(np.sum(res.sub_dw[seg])),
                    drift_coef * float(np.sum(seg_cossq)) * dt_sub,
                    2.0 * float(np.mean(seg_cossq)) - 1.0,
                    t_step + (g + 1) * plan.trigger_dt,
                )
            factor = new_factor
    record(plan.n_steps * dt)

    resets = ResetCounts()
    for f in filters:
        resets.vx_negative += f.resets.vx_negative
        resets.vp_negative += f.resets.vp_negative
        resets.area_small += f.resets.area_small
        resets.vx_large += f.resets.vx_large
        resets.non_finite += f.resets.non_finite
    return TrajectoryRecord(
        traj=traj,
        base_seed=settings.base_seed,
        attempt=attempt,
        failed=False,
        failure=None,
        absorbed=wf.absorbed,
        resets=resets,
        columns=rows.columns(),
    )


def _failed_record(
    settings: RunSettings,
    traj: int,
    attempt: int,
    lost: int,
    est_fail: int,
    failure: str,
) -> TrajectoryRecord:
    return TrajectoryRecord(
        traj=traj,
        base_seed=settings.base_seed,
        attempt=attempt,
        failed=True,
        failure=failure,
        absorbed=math.nan,
        resets=ResetCounts(),
        columns={},
        restarts_lost=lost,
        restarts_estimator=est_fail,
    )


def run_trajectory(settings: RunSettings, traj: int) -> TrajectoryRecord:
    """One trajectory, restarted with fresh seeds when the atom escapes.

    A boundary escape (``TrajectoryLost``) or a filter blow-up
    (``EstimatorStateError``) retries with the attempt counter bumped, up
    to ``max_attempts``; a numerical instability in the truth engine marks
    the trajectory failed immediately — rerunning cannot fix a bad Δt.
    """
    lost = 0
    est_fail = 0
    for attempt in range(settings.max_attempts):
        try:
            rec = _run_attempt(settings, traj, attempt)
        except TrajectoryLost:
            lost += 1
            continue
        except EstimatorStateError:
            est_fail += 1
            continue
        except NumericalInstabilityError as exc:
            return _failed_record(
                settings, traj, attempt, lost, est_fail,
                f"numerical instability: {exc}",
            )
        rec.restarts_lost = lost
        rec.restarts_estimator = est_fail
        return rec
    return _failed_record(
        settings,
        traj,
        settings.max_attempts - 1,
        lost,
        est_fail,
        f"trajectory lost in all {settings.max_attempts} attempts",
    )


def run_ensemble(
    settings: RunSettings, n_traj: int, jobs: int = 1
) -> list[TrajectoryRecord]:
    """Trajectories 0..n_traj−1, serial by default, one process per job."""
    if n_traj < 1:
        raise ParameterError(f"n_traj must be >= 1, got {n_traj!r}")
    if jobs <= 1:
        return [run_trajectory(settings, traj) for traj in range(n_traj)]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(partial(run_trajectory, settings), range(n_traj)))
