"""Baseband model of a PLL with lead-lag filter and triangular phase detector.

State is ``(x, theta_e)``: ``x`` is the loop-filter state and ``theta_e`` the
phase error. The dynamics are

    dx/dt       = (-x + tau1 * v_e(theta_e)) / (tau1 + tau2)
    dtheta_e/dt = omega - K_vco * (x + tau2 * v_e(theta_e)) / (tau1 + tau2)

with ``v_e`` the 2*pi-periodic triangle wave of unit amplitude.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .exceptions import InvalidParameters, NoEquilibria

TWO_OVER_PI = 2.0 / math.pi
HALF_PI = 0.5 * math.pi
TWO_PI = 2.0 * math.pi

#: relative band on the discriminant of the characteristic polynomial
DEGENERACY_TOL = 1e-9
DEFAULT_M_RANGE = range(-2, 3)


@dataclass(frozen=True)
class LoopParameters:
    """Physical loop constants.

    Attributes:
        tau1: filter time constant, s (> 0).
        tau2: filter zero time constant, s (>= 0; 0 is a lag filter).
        kvco: VCO gain, rad/s per unit phase-detector output (> 0).
    """

    tau1: float
    tau2: float
    kvco: float

    def __post_init__(self):
        for name in ("tau1", "tau2", "kvco"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise InvalidParameters(f"{name} must be finite, got {value!r}")
        if self.tau1 <= 0:
            raise InvalidParameters(f"tau1 must be > 0, got {self.tau1}")
        if self.tau2 < 0:
            raise InvalidParameters(f"tau2 must be >= 0, got {self.tau2}")
        if self.kvco <= 0:
            raise InvalidParameters(f"kvco must be > 0, got {self.kvco}")

    @property
    def tau(self) -> float:
        """Total filter time constant ``tau1 + tau2``."""
        return self.tau1 + self.tau2


@dataclass(frozen=True)
class PhaseState:
    x: float
    theta_e: float


class EquilibriumKind(enum.Enum):
    SADDLE = "saddle"
    STABLE_NODE = "stable-node"
    STABLE_DEGENERATE_NODE = "stable-degenerate-node"
    STABLE_FOCUS = "stable-focus"

    @property
    def is_stable(self) -> bool:
        return self is not EquilibriumKind.SADDLE


@dataclass(frozen=True)
class EquilibriumPoint:
    x_eq: float
    theta_eq: float
    index_m: int
    kind: EquilibriumKind


def _segment_phase(theta_e):
    # shift into [-pi/2, 3pi/2); first half is the rising segment
    return theta_e - TWO_PI * np.floor((theta_e + HALF_PI) / TWO_PI)


def pd_value(theta_e):
    """Triangular phase-detector characteristic ``v_e(theta_e)``.

    Works on floats and numpy arrays alike. The value is ``1`` at
    ``pi/2``, ``-1`` at ``-pi/2`` and zero at integer multiples of ``pi``.
    """
    if isinstance(theta_e, (float, int)):
        t = theta_e - TWO_PI * math.floor((theta_e + HALF_PI) / TWO_PI)
        return TWO_OVER_PI * t if t < HALF_PI else 2.0 - TWO_OVER_PI * t
    t = _segment_phase(np.asarray(theta_e, dtype=float))
    out = np.where(t < HALF_PI, TWO_OVER_PI * t, 2.0 - TWO_OVER_PI * t)
    return float(out) if out.ndim == 0 else out


def pd_slope(theta_e):
    """Derivative of :func:`pd_value`, ``+2/pi`` or ``-2/pi``.

    At the breakpoints ``+-pi/2 + 2*pi*m`` the right-hand derivative is returned.
    """
    if isinstance(theta_e, (float, int)):
        t = theta_e - TWO_PI * math.floor((theta_e + HALF_PI) / TWO_PI)
        return TWO_OVER_PI if t < HALF_PI else -TWO_OVER_PI
    t = _segment_phase(np.asarray(theta_e, dtype=float))
    out = np.where(t < HALF_PI, TWO_OVER_PI, -TWO_OVER_PI)
    return float(out) if out.ndim == 0 else out


def vector_field(state: PhaseState, params: LoopParameters, omega: float) -> tuple[float, float]:
    """Right-hand side ``(dx/dt, dtheta_e/dt)`` of the baseband model."""
    v = pd_value(state.theta_e)
    tau = params.tau
    dx = (-state.x + params.tau1 * v) / tau
    dtheta = omega - params.kvco * (state.x + params.tau2 * v) / tau
    return dx, dtheta


def jacobian(params: LoopParameters, theta_e: float) -> np.ndarray:
    """Jacobian of the vector field in ``(x, theta_e)`` order.

    Constant on each linear segment of the phase detector.
    """
    s = pd_slope(theta_e)
    tau = params.tau
    return np.array(
        [
            [-1.0 / tau, params.tau1 * s / tau],
            [-params.kvco / tau, -params.kvco * params.tau2 * s / tau],
        ]
    )


def characteristic_coefficients(params: LoopParameters, slope: float) -> tuple[float, float]:
    """Coefficients ``(b, c)`` of ``chi(lambda) = lambda**2 + b*lambda + c``."""
    tau = params.tau
    b = (1.0 + params.kvco * params.tau2 * slope) / tau
    c = params.kvco * slope / tau
    return b, c


def classify_equilibrium(params: LoopParameters, eq: EquilibriumPoint) -> EquilibriumKind:
    """Classify an equilibrium from the roots of its characteristic polynomial.

    Stable equilibria are split by the sign of the discriminant ``b**2 - 4c``;
    a discriminant within ``DEGENERACY_TOL * 4c`` of zero is a degenerate node.
    """
    slope = pd_slope(eq.theta_eq)
    if slope < 0:
        return EquilibriumKind.SADDLE
    b, c = characteristic_coefficients(params, slope)
    disc = b * b - 4.0 * c
    if abs(disc) <= DEGENERACY_TOL * 4.0 * c:
        return EquilibriumKind.STABLE_DEGENERATE_NODE
    if disc < 0:
        return EquilibriumKind.STABLE_FOCUS
    return EquilibriumKind.STABLE_NODE


def _check_hold_in(params: LoopParameters, omega: float) -> None:
    if not math.isfinite(omega):
        raise InvalidParameters(f"omega must be finite, got {omega!r}")
    if abs(omega) >= params.kvco:
        raise NoEquilibria(
            f"|omega| = {abs(omega)} is not below K_vco = {params.kvco}; no equilibria exist"
        )


def equilibrium(params: LoopParameters, omega: float, m: int) -> EquilibriumPoint:
    """Equilibrium number ``m``; even ``m`` are stable, odd ``m`` are saddles."""
    _check_hold_in(params, omega)
    ratio = omega / params.kvco
    sign = 1.0 if m % 2 == 0 else -1.0
    theta = sign * HALF_PI * ratio + math.pi * m
    x = params.tau1 * omega / params.kvco
    provisional = EquilibriumPoint(x, theta, m, EquilibriumKind.SADDLE)
    return EquilibriumPoint(x, theta, m, classify_equilibrium(params, provisional))


def equilibria(
    params: LoopParameters, omega: float, m_range: Iterable[int] = DEFAULT_M_RANGE
) -> list[EquilibriumPoint]:
    """All equilibria with index in ``m_range``.

    Raises:
        NoEquilibria: if ``|omega| >= K_vco``.
    """
    _check_hold_in(params, omega)
    return [equilibrium(params, omega, m) for m in m_range]


def hold_in_frequency(params: LoopParameters) -> float:
    """Upper end of the hold-in range ``[0, K_vco)``."""
    return params.kvco


def dissipativity_bound(params: LoopParameters) -> float:
    """Bound on ``|x|`` that every trajectory eventually satisfies."""
    return params.tau1
