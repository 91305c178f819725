"""Exact conservative lock-in frequency.

The baseband model is linear on each segment of the triangular characteristic,
so the saddle separatrix that decides whether a frequency step causes cycle
slipping can be propagated in closed form. In reduced coordinates

    y   = sqrt(pi*tau/(2K)) * omega - sqrt(pi*K/(2*tau)) * (x + tau2*v_e)
    tau = sqrt(2K/(pi*tau)) * t,       tau = tau1 + tau2

the dynamics become ``theta' = y`` and
``y' = -(pi/2) v_e - (1 + K tau2 v_e') y / sqrt((2/pi) K tau) + pi omega/(2K)``.

The separatrix of the saddle at ``pi - theta_s`` (``theta_s = pi omega/(2K)``)
is a straight eigenline on ``(pi/2, pi)``; it is carried across
``B = [-pi/2, pi/2]`` with the first integral ``N`` and across
``A = [-3pi/2, -pi/2]`` with ``M``. The lock-in boundary is the frequency at
which it passes through the saddle of the pre-step model, ``(theta_s - pi, Y)``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .exceptions import InvalidParameters, NoBracket, OutOfRange, SignFlip, SingularPoint
from .model import HALF_PI, TWO_OVER_PI, LoopParameters, PhaseState, pd_slope, pd_value

#: |xi - 1| below this selects the critically damped formulas
XI_ONE_TOL = 1e-9
Y_AB_XTOL = 1e-13
OMEGA_XTOL_REL = 1e-12
SCAN_POINTS = 64
MAX_DOUBLINGS = 60


class XiCase(enum.Enum):
    XI_GREATER = "xi>1"
    XI_EQUAL_ONE = "xi=1"
    XI_LESS = "xi<1"


@dataclass(frozen=True)
class ReducedParameters:
    """Dimensionless damping constants of the reduced system.

    ``xi`` is the damping ratio of the stable equilibria (segment B),
    ``eta`` the anti-damping of the saddles (segment A),
    ``rho = sqrt(|xi**2 - 1|)`` and ``kappa = sqrt(eta**2 + 1)``.
    """

    xi: float
    eta: float
    rho: float
    kappa: float

    @property
    def case(self) -> XiCase:
        if abs(self.xi - 1.0) < XI_ONE_TOL:
            return XiCase.XI_EQUAL_ONE
        return XiCase.XI_GREATER if self.xi > 1.0 else XiCase.XI_LESS


@dataclass(frozen=True)
class ReducedState:
    y: float
    theta_e: float
    tau: float = 0.0


@dataclass(frozen=True)
class LockInSolution:
    """Root ``(omega_lc, y_ab)`` of the lock-in system.

    ``residual_a`` is the domain-A first-integral mismatch at the root,
    ``residual_b`` the domain-B one at ``y_ab``. ``sign_changes`` counts the
    sign changes of the outer residual seen by the bracketing scan; more than
    one means the root is not unique on ``(0, K_vco)``.
    """

    omega_lc: float
    y_ab: float
    case_tag: XiCase
    residual_a: float
    residual_b: float
    iterations: int
    sign_changes: int = 1


def reduced_parameters(params: LoopParameters) -> ReducedParameters:
    a = TWO_OVER_PI * params.kvco * params.tau
    g = TWO_OVER_PI * params.tau2 * params.kvco
    root = 2.0 * math.sqrt(a)
    xi = (g + 1.0) / root
    eta = (g - 1.0) / root
    return ReducedParameters(xi, eta, math.sqrt(abs(xi * xi - 1.0)), math.sqrt(eta * eta + 1.0))


def tau2_for_damping(tau1: float, kvco: float, xi: float) -> float:
    """The ``tau2`` that gives damping ratio ``xi`` for fixed ``tau1`` and ``kvco``.

    Raises:
        InvalidParameters: if no non-negative ``tau2`` attains ``xi``.
    """
    c = TWO_OVER_PI * kvco
    disc = xi * xi - 1.0 + c * tau1
    if disc < 0:
        raise InvalidParameters(f"xi = {xi} is not attainable with tau1={tau1}, kvco={kvco}")
    tau2 = (2.0 * xi * xi - 1.0 + 2.0 * xi * math.sqrt(disc)) / c
    if tau2 < 0:
        raise InvalidParameters(f"xi = {xi} needs tau2 < 0 with tau1={tau1}, kvco={kvco}")
    return tau2


def time_scale(params: LoopParameters) -> float:
    """``d(tau)/dt`` of the reduced time."""
    return math.sqrt(2.0 * params.kvco / (math.pi * params.tau))


def _y_offset(params: LoopParameters, omega: float) -> float:
    return math.sqrt(math.pi * params.tau / (2.0 * params.kvco)) * omega


def _y_gain(params: LoopParameters) -> float:
    return math.sqrt(math.pi * params.kvco / (2.0 * params.tau))


def to_reduced(state: PhaseState, params: LoopParameters, omega: float, t: float = 0.0) -> ReducedState:
    """Map a model state (and time ``t``) to reduced coordinates."""
    y = _y_offset(params, omega) - _y_gain(params) * (state.x + params.tau2 * pd_value(state.theta_e))
    return ReducedState(y, state.theta_e, time_scale(params) * t)


def from_reduced(state: ReducedState, params: LoopParameters, omega: float) -> PhaseState:
    """Inverse of :func:`to_reduced` (time is dropped)."""
    x = (_y_offset(params, omega) - state.y) / _y_gain(params) - params.tau2 * pd_value(state.theta_e)
    return PhaseState(x, state.theta_e)


def reduced_vector_field(state: ReducedState, params: LoopParameters, omega: float) -> tuple[float, float]:
    """``(dy/dtau, dtheta_e/dtau)`` of the reduced system."""
    damping = (1.0 + params.kvco * params.tau2 * pd_slope(state.theta_e)) / math.sqrt(
        TWO_OVER_PI * params.kvco * params.tau
    )
    dy = -HALF_PI * pd_value(state.theta_e) - damping * state.y + math.pi * omega / (2.0 * params.kvco)
    return dy, state.y


def _check_omega(params: LoopParameters, omega: float) -> None:
    if not (0.0 < omega < params.kvco):
        raise OutOfRange(f"omega must lie in (0, {params.kvco}), got {omega}")


def _stable_phase(params: LoopParameters, omega: float) -> float:
    return math.pi * omega / (2.0 * params.kvco)


def separatrix_initial_value(params: LoopParameters, omega: float) -> float:
    """Height ``S(pi/2)`` of the upper separatrix where it enters domain B.

    On ``(pi/2, pi)`` the separatrix is the stable eigenline of the saddle,
    ``y = (kappa - eta) * (pi - theta_s - theta)``.
    """
    _check_omega(params, omega)
    r = reduced_parameters(params)
    return (r.kappa - r.eta) * (HALF_PI - _stable_phase(params, omega))


def _log_abs(value: float, what: str) -> float:
    if value == 0.0 or not math.isfinite(value):
        raise SingularPoint(f"{what} vanishes")
    return math.log(abs(value))


def _n_value(y: float, s: float, r: ReducedParameters, case: XiCase) -> float:
    # s = theta_e - theta_s
    if case is XiCase.XI_GREATER:
        f1 = y + (r.xi - r.rho) * s
        f2 = y + (r.xi + r.rho) * s
        return 0.5 * (
            (r.rho - r.xi) / r.rho * _log_abs(f1, "slow-eigenline factor")
            + (r.rho + r.xi) / r.rho * _log_abs(f2, "fast-eigenline factor")
        )
    if case is XiCase.XI_EQUAL_ONE:
        f = y + s
        log_f = _log_abs(2.0 * f, "eigenline factor")
        return s / f + log_f
    q = y * y + 2.0 * r.xi * y * s + s * s
    log_q = _log_abs(q, "quadratic form")
    num = y + r.xi * s
    den = s * r.rho
    angle = math.copysign(HALF_PI, num) if den == 0.0 else math.atan(num / den)
    return 0.5 * log_q - r.xi / r.rho * angle


def first_integral_B(y: float, theta_e: float, params: LoopParameters, omega: float) -> float:
    """First integral ``N`` of the rising segment ``[-pi/2, pi/2]``.

    The formula depends on the damping case of :func:`reduced_parameters`.
    For ``xi < 1`` the arctangent branch jumps by ``pi*xi/rho`` where a
    trajectory with ``y > 0`` crosses ``theta_e = theta_s``; callers compare
    values on opposite sides with that offset.

    Raises:
        SingularPoint: on an eigenline of the stable node, or at the equilibrium.
    """
    r = reduced_parameters(params)
    return _n_value(y, theta_e - _stable_phase(params, omega), r, r.case)


def _m_factors(y: float, u: float, r: ReducedParameters) -> tuple[float, float]:
    # u = theta_e + pi + theta_s; the factors vanish on the saddle's eigenlines
    return y + (r.kappa - r.eta) * u, y - (r.kappa + r.eta) * u


def _m_value(y: float, u: float, r: ReducedParameters) -> float:
    f1, f2 = _m_factors(y, u, r)
    return 0.5 * (
        (r.kappa - r.eta) / r.kappa * _log_abs(f1, "stable-eigenline factor")
        + (r.kappa + r.eta) / r.kappa * _log_abs(f2, "unstable-eigenline factor")
    )


def first_integral_A(y: float, theta_e: float, params: LoopParameters, omega: float) -> float:
    """First integral ``M`` of the falling segment ``[-3pi/2, -pi/2]``.

    Raises:
        SingularPoint: on either eigenline of the saddle at ``-pi - theta_s``.
    """
    r = reduced_parameters(params)
    return _m_value(y, theta_e + math.pi + _stable_phase(params, omega), r)


def _b_target(params: LoopParameters, omega: float, r: ReducedParameters, case: XiCase) -> float:
    d = HALF_PI - _stable_phase(params, omega)
    s_top = (r.kappa - r.eta) * d
    target = _n_value(s_top, d, r, case)
    if case is XiCase.XI_LESS:
        target += math.pi * r.xi / r.rho
    return target


def _y_ab_floor(r: ReducedParameters, case: XiCase, e: float) -> float:
    # the separatrix cannot cross the stable node's eigenlines
    if case is XiCase.XI_GREATER:
        return (r.xi + r.rho) * e
    if case is XiCase.XI_EQUAL_ONE:
        return e
    return 0.0


def _solve_y_ab(params: LoopParameters, omega: float, r: ReducedParameters, case: XiCase) -> float:
    e = HALF_PI + _stable_phase(params, omega)
    target = _b_target(params, omega, r, case)

    def residual(y):
        return _n_value(y, -e, r, case) - target

    lo = _y_ab_floor(r, case, e)
    lo = lo + 1e-12 + 4 * np.finfo(float).eps * lo
    f_lo = residual(lo)
    if f_lo > 0:
        raise NoBracket(
            f"separatrix leaves y > 0 inside the rising segment at omega={omega}; no y_AB exists"
        )
    hi = (r.kappa - r.eta + r.xi + r.rho) * math.pi * (1.0 + omega / params.kvco)
    for _ in range(MAX_DOUBLINGS):
        if residual(hi) > 0:
            break
        hi *= 2.0
    else:
        raise NoBracket(f"no sign change for y_AB below {hi} at omega={omega}")
    return optimize.brentq(residual, lo, hi, xtol=Y_AB_XTOL, rtol=4 * np.finfo(float).eps)


def solve_y_ab(params: LoopParameters, omega: float) -> float:
    """Height ``y_AB = S(-pi/2)`` of the separatrix at the segment boundary.

    Solves ``N(y_AB, -pi/2) = N(S(pi/2), pi/2)`` (plus ``pi*xi/rho`` when
    ``xi < 1``) on the upper branch by bracketed root finding.

    Raises:
        OutOfRange: unless ``0 < omega < K_vco``.
        NoBracket: if the separatrix drops to ``y = 0`` before ``-pi/2``.
    """
    _check_omega(params, omega)
    r = reduced_parameters(params)
    return _solve_y_ab(params, omega, r, r.case)


def pre_step_saddle_height(params: LoopParameters, omega: float) -> float:
    """Reduced height ``Y`` of the saddle of the ``-omega`` model.

    After the frequency step this point sits at ``theta_e = theta_s - pi``.
    """
    return 2.0 * omega * math.sqrt(math.pi * params.tau / (2.0 * params.kvco))


def _outer_residual(params: LoopParameters, omega: float, r: ReducedParameters, case: XiCase):
    # positive: the pre-step saddle lies above the separatrix (slip side)
    try:
        y_ab = _solve_y_ab(params, omega, r, case)
    except NoBracket:
        return math.inf, None
    theta_s = _stable_phase(params, omega)
    e = HALF_PI + theta_s
    f1_ab, f2_ab = _m_factors(y_ab, e, r)
    if f1_ab <= 0:
        raise SignFlip(f"stable-eigenline factor of M is {f1_ab} at y_AB (omega={omega})")
    if f2_ab <= 0:
        # separatrix is under the unstable eigenline of the A-saddle; the
        # pre-step saddle never is (kappa > xi), so it is on the slip side
        return math.inf, y_ab
    big_y = pre_step_saddle_height(params, omega)
    u_star = 2.0 * theta_s
    f1, f2 = _m_factors(big_y, u_star, r)
    if f1 <= 0 or f2 <= 0:
        raise SignFlip(f"pre-step saddle is not above the A-saddle eigenlines (omega={omega})")
    return _m_value(big_y, u_star, r) - _m_value(y_ab, e, r), y_ab


def lock_in_residual(params: LoopParameters, omega: float) -> float:
    """Domain-A first-integral mismatch ``M(Y, theta_s - pi) - M(y_AB, -pi/2)``.

    Negative below the conservative lock-in frequency and positive above it.
    ``+inf`` when the separatrix falls below the unstable eigenline of the
    domain-A saddle or leaves ``y > 0`` in domain B (both on the slip side).
    """
    _check_omega(params, omega)
    r = reduced_parameters(params)
    return _outer_residual(params, omega, r, r.case)[0]


def lock_in_equations(params: LoopParameters, omega: float, y_ab: float) -> tuple[float, float]:
    """Both equations of the lock-in system in closed product form, as LHS - RHS.

    The first row is the domain-A relation with fractional powers; the second
    row is the damping-case-specific domain-B relation. Used to cross-check the
    logarithmic formulation that :func:`conservative_lock_in` solves.
    """
    r = reduced_parameters(params)
    k, w = params.kvco, omega
    kk = TWO_OVER_PI * k
    c = math.sqrt(params.tau / kk)
    p1, p2 = (r.kappa - r.eta) / r.kappa, (r.kappa + r.eta) / r.kappa
    lhs_a = (2 * w) ** 2 * (c - (r.eta - r.kappa) / kk) ** p1 * (c - (r.eta + r.kappa) / kk) ** p2
    rhs_a = (y_ab - (r.eta - r.kappa) * (w + k) / kk) ** p1 * (y_ab - (r.eta + r.kappa) * (w + k) / kk) ** p2
    e = (w + k) / kk
    d = (k - w) / kk
    km = r.kappa - r.eta
    case = r.case
    if case is XiCase.XI_GREATER:
        q1, q2 = (r.rho - r.xi) / r.rho, (r.rho + r.xi) / r.rho
        lhs_b = (y_ab - (r.xi - r.rho) * e) ** q1 * (y_ab - (r.xi + r.rho) * e) ** q2
        rhs_b = (km + r.xi - r.rho) ** q1 * (km + r.xi + r.rho) ** q2 * d**2
    elif case is XiCase.XI_EQUAL_ONE:
        lhs_b = (k + w) / (k + w - kk * y_ab) + math.log(2 * abs(y_ab - e))
        rhs_b = 1.0 / (km + 1.0) + math.log(2 * (km + 1.0) * d)
    else:
        lhs_b = (
            0.5 * math.log(y_ab**2 - 2 * r.xi * y_ab * e + e**2)
            - r.xi / r.rho * math.atan((y_ab - r.xi * e) / (-e * r.rho))
            + r.xi / r.rho * math.atan((km + r.xi) / r.rho)
        )
        rhs_b = 0.5 * math.log((km**2 + 2 * r.xi * km + 1) * d**2) + math.pi * r.xi / r.rho
    return lhs_a - rhs_a, lhs_b - rhs_b


def _scan(params: LoopParameters, r: ReducedParameters, case: XiCase, points: int):
    k = params.kvco
    grid = np.linspace(1e-6 * k, (1.0 - 1e-6) * k, points)
    values = np.array([_outer_residual(params, w, r, case)[0] for w in grid])
    signs = np.sign(values)
    changes = np.nonzero(signs[:-1] * signs[1:] < 0)[0]
    return grid, values, changes


def conservative_lock_in(params: LoopParameters, scan_points: int = SCAN_POINTS) -> LockInSolution:
    """Solve the two-variable lock-in system for ``(omega_lc, y_AB)``.

    A coarse scan of ``(0, K_vco)`` brackets the first sign change of
    :func:`lock_in_residual`; Brent's method then refines it.

    Raises:
        NoBracket: if the residual does not change sign on ``(0, K_vco)``.
    """
    r = reduced_parameters(params)
    case = r.case
    grid, values, changes = _scan(params, r, case, scan_points)
    if changes.size == 0:
        raise NoBracket(
            f"lock-in residual keeps sign {np.sign(values[0]):+.0f} on (0, {params.kvco}) "
            f"for tau1={params.tau1}, tau2={params.tau2}"
        )
    i = changes[0]

    def compressed(w):
        # bounded monotone transform keeps Brent well defined where residual is +inf
        return math.atan(_outer_residual(params, w, r, case)[0])

    omega, info = optimize.brentq(
        compressed,
        grid[i],
        grid[i + 1],
        xtol=OMEGA_XTOL_REL * params.kvco,
        rtol=4 * np.finfo(float).eps,
        full_output=True,
    )
    residual_a, y_ab = _outer_residual(params, omega, r, case)
    e = HALF_PI + _stable_phase(params, omega)
    residual_b = _n_value(y_ab, -e, r, case) - _b_target(params, omega, r, case)
    return LockInSolution(omega, y_ab, case, residual_a, residual_b, info.iterations, int(changes.size))
