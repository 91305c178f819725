"""Lyapunov-function estimate of the pull-in range."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

from scipy import integrate

from .exceptions import ConditionInapplicable, OutOfRange
from .model import HALF_PI, TWO_PI, LoopParameters, pd_value

QUAD_EPSABS = 1e-10


@dataclass(frozen=True)
class StabilityReport:
    """Outcome of the Lyapunov pull-in analysis.

    ``threshold`` is the right-hand side of the global-stability inequality:
    the condition holds for ``omega`` iff ``beta0(omega) < threshold``.
    ``beta0`` and ``condition_holds`` are only set when a frequency error was
    supplied.
    """

    threshold: float
    pull_in_lower_bound: float
    bound_is_trivial: bool
    omega: Optional[float] = None
    beta0: Optional[float] = None
    condition_holds: Optional[bool] = None


def _check_open(omega: float, kvco: float) -> None:
    if not (0.0 < omega < kvco):
        raise OutOfRange(f"omega must lie in (0, {kvco}), got {omega}")


def beta0(omega: float, kvco: float) -> float:
    """Closed-form coefficient ``2*omega*K / (omega**2 + K**2)``."""
    _check_open(omega, kvco)
    return 2.0 * omega * kvco / (omega * omega + kvco * kvco)


def beta0_from_integrals(omega: float, kvco: float) -> float:
    """Evaluate the defining ratio of ``beta0`` by adaptive quadrature.

    Independent check on :func:`beta0`. The interval ``[0, 2*pi]`` is split at
    the kinks of ``v_e`` and at the zeros of ``v_e(s) - omega/K`` so each
    piece is smooth.
    """
    _check_open(omega, kvco)
    r = omega / kvco
    breaks = sorted({0.0, HALF_PI, 3.0 * HALF_PI, HALF_PI * r, math.pi - HALF_PI * r, TWO_PI})

    def shifted(s):
        return pd_value(s) - r

    num = den = 0.0
    for a, b in zip(breaks[:-1], breaks[1:]):
        num += integrate.quad(shifted, a, b, epsabs=QUAD_EPSABS, epsrel=1e-12)[0]
        den += integrate.quad(lambda s: abs(shifted(s)), a, b, epsabs=QUAD_EPSABS, epsrel=1e-12)[0]
    return -num / den


def stability_threshold(params: LoopParameters) -> float:
    """Right-hand side ``2*(sqrt(tau2*(tau1+tau2)) - tau2) / tau1`` of the condition.

    Always in ``[0, 1)``; zero for a lag filter.
    """
    t1, t2 = params.tau1, params.tau2
    return 2.0 * (math.sqrt(t2 * (t1 + t2)) - t2) / t1


def global_stability_condition(params: LoopParameters, omega: float) -> bool:
    """True iff the Lyapunov condition certifies global stability at ``omega``.

    Raises:
        ConditionInapplicable: for a lag filter (``tau2 == 0``).
        OutOfRange: unless ``0 < omega < K_vco``.
    """
    if params.tau2 == 0:
        raise ConditionInapplicable("tau2 = 0: the stability inequality has an empty solution set")
    return beta0(omega, params.kvco) < stability_threshold(params)


def pull_in_lower_bound(params: LoopParameters, omega: Optional[float] = None) -> StabilityReport:
    """Lower bound on the pull-in frequency from the Lyapunov condition.

    If ``omega`` is given, ``beta0`` and the condition at that frequency are
    added to the report.
    """
    k = params.kvco
    threshold = stability_threshold(params)
    if params.tau2 == 0:
        bound, trivial = 0.0, True
    else:
        a = params.tau1 / (2.0 * math.sqrt(params.tau2 * params.tau) - 2.0 * params.tau2)
        radicand = a * a - 1.0
        if radicand < 0:
            # condition holds on the whole hold-in range
            bound = k
        else:
            bound = min((a - math.sqrt(radicand)) * k, k)
        trivial = False
    report = StabilityReport(threshold, bound, trivial)
    if omega is None:
        return report
    b0 = beta0(omega, k)
    holds = False if params.tau2 == 0 else b0 < threshold
    return StabilityReport(threshold, bound, trivial, omega, b0, holds)
