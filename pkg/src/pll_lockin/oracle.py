"""Numerical cross-checks by direct integration of the baseband model.

Everything here is independent of the closed-form first integrals in
:mod:`pll_lockin.lockin`: trajectories are integrated with an adaptive
embedded Runge-Kutta pair, split at every phase-detector breakpoint so that
each call to the stepper sees a single linear segment.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import optimize
from scipy.integrate import solve_ivp

from .exceptions import InvalidParameters, NoBracket, OutOfRange, StepUnderflow, Undecided
from .lockin import from_reduced, reduced_parameters, time_scale, ReducedState
from .model import HALF_PI, TWO_OVER_PI, TWO_PI, LoopParameters, PhaseState, pd_value

METHOD = "DOP853"
DEFAULT_TOL = 1e-9
DEFAULT_EPSILON = 1e-7
#: integration horizon in reduced-time units
HORIZON = 1e3
SLIP_MARGIN = 1e-3
CAPTURE_RADIUS = 1e-3
#: phase distance from the saddle before the separatrix may count as turned
CLEARANCE = 1e-3
MAX_SEGMENTS = 100_000


@dataclass(frozen=True)
class BoundaryEvent:
    t: float
    theta_e: float


@dataclass(frozen=True)
class StopCondition:
    """Terminal condition ``func(x, theta_e) == 0`` crossed in ``direction``.

    ``direction`` follows the integration progression: ``+1`` fires when the
    function goes from negative to positive, ``-1`` the reverse, ``0`` both.
    """

    func: Callable[[float, float], float]
    direction: int = 0
    label: str = ""


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Samples of one integrated trajectory.

    ``t``, ``x`` and ``theta_e`` are parallel arrays in integration order.
    ``events`` lists the breakpoint crossings; each crossing is also a sample.
    """

    params: LoopParameters
    omega: float
    t: np.ndarray
    x: np.ndarray
    theta_e: np.ndarray
    events: tuple[BoundaryEvent, ...] = ()
    stop_label: Optional[str] = None

    def __len__(self) -> int:
        return len(self.t)

    @property
    def samples(self) -> list[tuple[float, PhaseState]]:
        return [(float(t), PhaseState(float(x), float(th))) for t, x, th in zip(self.t, self.x, self.theta_e)]

    @property
    def final(self) -> PhaseState:
        return PhaseState(float(self.x[-1]), float(self.theta_e[-1]))

    def reduced_y(self) -> np.ndarray:
        tau = self.params.tau
        offset = math.sqrt(math.pi * tau / (2.0 * self.params.kvco)) * self.omega
        gain = math.sqrt(math.pi * self.params.kvco / (2.0 * tau))
        return offset - gain * (self.x + self.params.tau2 * pd_value(self.theta_e))

    def x_at_theta(self, theta: float) -> float:
        """Linear interpolation of ``x`` at phase ``theta`` (theta must be monotone)."""
        th = self.theta_e
        order = np.argsort(th)
        return float(np.interp(theta, th[order], self.x[order]))


def _segment(theta: float, heading: float) -> tuple[float, float, float, float]:
    """Breakpoints ``lo < hi`` around ``theta`` and the linear PD law ``a*theta + c`` between."""
    k = math.floor((theta + HALF_PI) / math.pi)
    # snapped breakpoints may round to either neighbour; the heading decides
    slack = 8 * math.ulp(max(abs(theta), math.pi))
    if heading < 0 and theta <= -HALF_PI + k * math.pi + slack:
        k -= 1
    elif heading > 0 and theta >= HALF_PI + k * math.pi - slack:
        k += 1
    lo = -HALF_PI + k * math.pi
    hi = lo + math.pi
    if k % 2 == 0:
        return lo, hi, TWO_OVER_PI, -2.0 * k
    return lo, hi, -TWO_OVER_PI, 2.0 * k


def _check_tol(tol: float) -> None:
    if not (1e-13 <= tol <= 1e-3):
        raise InvalidParameters(f"tol must lie in [1e-13, 1e-3], got {tol}")


def integrate_trajectory(
    params: LoopParameters,
    omega: float,
    initial: PhaseState,
    t_end: float,
    tol: float = DEFAULT_TOL,
    stop: Sequence[StopCondition] = (),
    max_step: float = math.inf,
) -> Trajectory:
    """Integrate the baseband model from ``initial`` over ``[0, t_end]``.

    A negative ``t_end`` integrates backward in time. Relative and absolute
    tolerances are both ``tol``. Integration ends early when any ``stop``
    condition fires; its label is stored in ``Trajectory.stop_label``.

    Raises:
        StepUnderflow: if the adaptive step collapses.
    """
    _check_tol(tol)
    if not math.isfinite(t_end):
        raise InvalidParameters("t_end must be finite")
    tau = params.tau
    k, t1, t2 = params.kvco, params.tau1, params.tau2
    sign = 1.0 if t_end >= 0 else -1.0

    ts, xs, ths = [0.0], [initial.x], [initial.theta_e]
    events: list[BoundaryEvent] = []
    t, x, th = 0.0, float(initial.x), float(initial.theta_e)
    stop_label = None

    user_events = []
    for cond in stop:
        def ev(_t, s, _f=cond.func):
            return _f(s[0], s[1])

        ev.terminal = True
        ev.direction = cond.direction
        user_events.append(ev)

    for _ in range(MAX_SEGMENTS):
        if t == t_end:
            break
        v = pd_value(th)
        heading = sign * (omega - k * (x + t2 * v) / tau)
        lo, hi, a, c = _segment(th, heading)

        def rhs(_t, s, a=a, c=c):
            ve = a * s[1] + c
            return [(-s[0] + t1 * ve) / tau, omega - k * (s[0] + t2 * ve) / tau]

        def hit_lo(_t, s, lo=lo):
            return s[1] - lo

        def hit_hi(_t, s, hi=hi):
            return s[1] - hi

        hit_lo.terminal = hit_hi.terminal = True
        hit_lo.direction, hit_hi.direction = -1, 1

        sol = solve_ivp(
            rhs,
            (t, t_end),
            [x, th],
            method=METHOD,
            rtol=tol,
            atol=tol,
            events=[hit_lo, hit_hi, *user_events],
            max_step=max_step,
        )
        if sol.status == -1:
            raise StepUnderflow(f"integration failed at t={t}: {sol.message}")
        seg_t, seg_x, seg_th = sol.t[1:], sol.y[0, 1:], sol.y[1, 1:]
        ts.extend(seg_t)
        xs.extend(seg_x)
        ths.extend(seg_th)
        if sol.status == 0:
            break
        # terminal event: find which one fired (the last sample is the event point)
        fired = [i for i, te in enumerate(sol.t_events) if te.size]
        t = float(sol.t[-1])
        x = float(sol.y[0, -1])
        th = float(sol.y[1, -1])
        user_hits = [i - 2 for i in fired if i >= 2]
        if user_hits:
            stop_label = stop[user_hits[0]].label or f"stop[{user_hits[0]}]"
            break
        boundary = lo if 0 in fired else hi
        th = boundary
        ths[-1] = boundary
        events.append(BoundaryEvent(t, boundary))
    else:
        raise Undecided(f"more than {MAX_SEGMENTS} segment crossings before t_end={t_end}")

    return Trajectory(
        params,
        omega,
        np.asarray(ts),
        np.asarray(xs),
        np.asarray(ths),
        tuple(events),
        stop_label,
    )


@dataclass(frozen=True)
class SaddleLocalFrame:
    """Eigen-directions of a saddle in reduced ``(delta theta_e, delta y)`` coordinates.

    ``v_stable = (1, eta - kappa)`` spans the stable manifold and
    ``v_unstable = (1, eta + kappa)`` the unstable one.
    """

    theta_eq: float
    x_eq: float
    v_stable: tuple[float, float]
    v_unstable: tuple[float, float]
    eigenvalues: tuple[float, float]
    epsilon: float = DEFAULT_EPSILON


def saddle_frame(params: LoopParameters, omega: float, epsilon: float = DEFAULT_EPSILON) -> SaddleLocalFrame:
    """Local frame of the saddle at ``pi - pi*omega/(2K)`` (reduced time units)."""
    r = reduced_parameters(params)
    theta = math.pi - math.pi * omega / (2.0 * params.kvco)
    return SaddleLocalFrame(
        theta,
        params.tau1 * omega / params.kvco,
        (1.0, r.eta - r.kappa),
        (1.0, r.eta + r.kappa),
        (r.eta - r.kappa, r.eta + r.kappa),
        epsilon,
    )


def _theta_rate(params: LoopParameters, omega: float) -> Callable[[float, float], float]:
    k, t2, tau = params.kvco, params.tau2, params.tau

    def rate(x, th):
        return omega - k * (x + t2 * pd_value(th)) / tau

    return rate


def trace_separatrix(
    params: LoopParameters,
    omega: float,
    epsilon: float = DEFAULT_EPSILON,
    tol: float = DEFAULT_TOL,
    theta_stop: Optional[float] = None,
) -> Trajectory:
    """Trace the upper stable separatrix of the saddle at ``pi - pi*omega/(2K)``.

    Seeds the state ``epsilon`` away from the saddle along the stable
    eigen-direction, on the side with ``theta_e`` below the saddle and
    ``y > 0`` (the lower branch in ``x``), then integrates backward in time
    until ``theta_e`` reaches ``theta_stop`` (default ``pi*omega/(2K) - pi``).
    Tracing also stops if the branch turns (``dtheta_e/dt = 0``).

    The samples approximate ``x = Q(theta_e, omega)``.
    """
    if not (0.0 < omega < params.kvco):
        raise OutOfRange(f"omega must lie in (0, {params.kvco}), got {omega}")
    if not (1e-10 <= epsilon <= 1e-4):
        raise InvalidParameters(f"epsilon must lie in [1e-10, 1e-4], got {epsilon}")
    frame = saddle_frame(params, omega, epsilon)
    if theta_stop is None:
        theta_stop = math.pi * omega / (2.0 * params.kvco) - math.pi
    # step toward smaller theta along the stable direction: (-1, kappa - eta)
    dth, dy = -frame.v_stable[0] * epsilon, -frame.v_stable[1] * epsilon
    seed = from_reduced(ReducedState(dy, frame.theta_eq + dth), params, omega)
    t_end = -HORIZON / time_scale(params)
    reached = StopCondition(lambda x, th: th - theta_stop, -1, "theta_stop")
    # near the seed dtheta/dt is roundoff-sized, so the turning test is armed
    # only once the trace has cleared the saddle neighbourhood
    clear_at = max(frame.theta_eq - CLEARANCE, theta_stop)
    cleared = StopCondition(lambda x, th: th - clear_at, -1, "cleared")
    first = integrate_trajectory(params, omega, seed, t_end, tol, (reached, cleared))
    if first.stop_label != "cleared":
        return first
    t0 = float(first.t[-1])
    rest = integrate_trajectory(
        params,
        omega,
        first.final,
        t_end - t0,
        tol,
        (reached, StopCondition(_theta_rate(params, omega), -1, "turned")),
    )
    return _join(first, rest, rest.stop_label)


def _join(first: Trajectory, rest: Trajectory, label: Optional[str]) -> Trajectory:
    # append ``rest`` (started at ``first.final``) to ``first``
    t0 = float(first.t[-1])
    shifted = tuple(BoundaryEvent(e.t + t0, e.theta_e) for e in rest.events)
    return Trajectory(
        first.params,
        first.omega,
        np.concatenate([first.t, rest.t[1:] + t0]),
        np.concatenate([first.x, rest.x[1:]]),
        np.concatenate([first.theta_e, rest.theta_e[1:]]),
        first.events + shifted,
        label,
    )


def separatrix_gap(
    params: LoopParameters, omega: float, epsilon: float = DEFAULT_EPSILON, tol: float = DEFAULT_TOL
) -> float:
    """``Q(theta_s - pi, omega) + tau1*omega/K``; negative means no slip.

    ``+inf`` when the separatrix turns back before reaching ``theta_s - pi``.
    """
    traj = trace_separatrix(params, omega, epsilon, tol)
    if traj.stop_label != "theta_stop":
        return math.inf
    return float(traj.x[-1]) + params.tau1 * omega / params.kvco


def _first_sign_change(func, lo: float, hi: float, points: int):
    grid = np.linspace(lo, hi, points)
    prev = func(grid[0])
    for a, b in zip(grid[:-1], grid[1:]):
        cur = func(b)
        if prev < 0 < cur or prev > 0 > cur:
            return a, b
        prev = cur
    return None


def numeric_conservative_lock_in(
    params: LoopParameters,
    tol: float = DEFAULT_TOL,
    epsilon: float = DEFAULT_EPSILON,
    scan_points: int = 16,
) -> float:
    """Conservative lock-in frequency from traced separatrices.

    Finds the frequency step at which the separatrix of the post-step saddle
    passes through the saddle of the pre-step model.

    Raises:
        NoBracket: if the separatrix gap does not change sign on ``(0, K_vco)``.
    """
    _check_tol(tol)
    k = params.kvco
    scale = params.tau1

    def g(w):
        return math.atan(separatrix_gap(params, w, epsilon, tol) / scale)

    bracket = _first_sign_change(g, 1e-3 * k, (1.0 - 1e-3) * k, scan_points)
    if bracket is None:
        raise NoBracket(f"separatrix gap keeps its sign on (0, {k})")
    return optimize.brentq(g, *bracket, xtol=tol * k, rtol=4 * np.finfo(float).eps)


@dataclass(frozen=True)
class StepResponse:
    """Outcome of an abrupt frequency step applied to an equilibrium.

    ``slipped`` follows the finite-time rule: the phase passed the next saddle
    by ``SLIP_MARGIN`` before entering the ``CAPTURE_RADIUS`` ball (reduced
    coordinates) of the next stable equilibrium.
    """

    omega: float
    start: PhaseState
    slipped: bool
    sup_deviation: float
    trajectory: Trajectory = field(repr=False)


def pre_step_state(params: LoopParameters, omega: float, start: str = "saddle") -> PhaseState:
    """Equilibrium of the ``-omega`` model the step starts from.

    ``start="saddle"`` gives the saddle at ``theta_s - pi`` (conservative
    case), ``"stable"`` the stable equilibrium at ``2*pi - theta_s``.
    """
    theta_s = math.pi * omega / (2.0 * params.kvco)
    x0 = -params.tau1 * omega / params.kvco
    if start == "saddle":
        return PhaseState(x0, theta_s - math.pi)
    if start == "stable":
        return PhaseState(x0, TWO_PI - theta_s)
    raise InvalidParameters(f"start must be 'saddle' or 'stable', got {start!r}")


def frequency_step(
    params: LoopParameters,
    omega: float,
    start: str | PhaseState = "saddle",
    tol: float = DEFAULT_TOL,
    settle: bool = True,
) -> StepResponse:
    """Apply a step from ``-omega`` to ``omega`` and report whether the phase slips.

    With ``settle`` a slipping trajectory is followed until it is captured, so
    ``sup_deviation`` covers the whole transient; bisection turns it off.

    Raises:
        Undecided: if neither outcome is reached within the horizon.
    """
    if not (0.0 < omega < params.kvco):
        raise OutOfRange(f"omega must lie in (0, {params.kvco}), got {omega}")
    initial = pre_step_state(params, omega, start) if isinstance(start, str) else start
    theta_s = math.pi * omega / (2.0 * params.kvco)
    target = theta_s + TWO_PI * math.ceil((initial.theta_e - theta_s) / TWO_PI + 1e-12)
    saddle = target + math.pi - 2.0 * theta_s
    x_target = params.tau1 * omega / params.kvco
    gain = math.sqrt(math.pi * params.kvco / (2.0 * params.tau))

    def distance(x, th):
        return math.hypot(gain * (x - x_target), th - target) - CAPTURE_RADIUS

    stops = (
        StopCondition(lambda x, th: th - (saddle + SLIP_MARGIN), 1, "slip"),
        StopCondition(distance, -1, "captured"),
    )
    horizon = HORIZON / time_scale(params)
    traj = integrate_trajectory(params, omega, initial, horizon, tol, stops)
    if traj.stop_label is None:
        raise Undecided(f"no capture or slip within the horizon at omega={omega}")
    slipped = traj.stop_label == "slip"
    if slipped and settle:
        traj = _settle(traj, horizon, tol, theta_s, x_target, gain)
    sup_dev = float(np.max(np.abs(traj.theta_e - initial.theta_e)))
    return StepResponse(omega, initial, slipped, sup_dev, traj)


def _settle(traj: Trajectory, horizon: float, tol: float, theta_s: float, x_target: float, gain: float) -> Trajectory:
    # continue a slipping trajectory until some stable equilibrium captures it
    def distance_any(x, th):
        wrapped = math.remainder(th - theta_s, TWO_PI)
        return math.hypot(gain * (x - x_target), wrapped) - CAPTURE_RADIUS

    t0 = float(traj.t[-1])
    rest = integrate_trajectory(
        traj.params,
        traj.omega,
        traj.final,
        horizon - t0,
        tol,
        (StopCondition(distance_any, -1, "captured"),),
    )
    if rest.stop_label is None:
        raise Undecided(f"slipping trajectory not captured within the horizon at omega={traj.omega}")
    return _join(traj, rest, "slip")


def numeric_lock_in(params: LoopParameters, tol: float = DEFAULT_TOL, scan_points: int = 16) -> float:
    """Lock-in frequency (stable start) by bisection on the slip predicate.

    The step starts at the stable equilibrium of the ``-omega`` model,
    ``(-tau1*omega/K, 2*pi - pi*omega/(2K))``.

    Raises:
        NoBracket: if no slip/no-slip transition is found on ``(0, K_vco)``.
    """
    _check_tol(tol)
    k = params.kvco

    def slips(w):
        return frequency_step(params, w, "stable", tol, settle=False).slipped

    grid = np.linspace(1e-3 * k, (1.0 - 1e-3) * k, scan_points)
    lo = hi = None
    for w in grid:
        if slips(w):
            hi = w
            break
        lo = w
    if lo is None or hi is None:
        raise NoBracket(f"slip predicate does not change on (0, {k})")
    while hi - lo > tol * k:
        mid = 0.5 * (lo + hi)
        if slips(mid):
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)
