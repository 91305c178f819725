import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from pll_lockin import (
    LoopParameters,
    NoBracket,
    OutOfRange,
    PhaseState,
    ReducedState,
    SingularPoint,
    XiCase,
    conservative_lock_in,
    first_integral_A,
    first_integral_B,
    lock_in_equations,
    lock_in_residual,
    pd_slope,
    pd_value,
    reduced_parameters,
    reduced_vector_field,
    separatrix_initial_value,
    solve_y_ab,
    tau2_for_damping,
    to_reduced,
    vector_field,
)
from pll_lockin.lockin import from_reduced, pre_step_saddle_height, time_scale

from conftest import UNDERDAMPED, OVERDAMPED

PI = math.pi
W = 73.732
CRITICAL = LoopParameters(0.0633, tau2_for_damping(0.0633, 250.0, 1.0), 250.0)
CASES = {"xi<1": UNDERDAMPED, "xi=1": CRITICAL, "xi>1": OVERDAMPED}


def test_reduced_parameters_underdamped():
    r = reduced_parameters(UNDERDAMPED)
    assert r.xi == pytest.approx(0.619833835653754805, rel=1e-14)
    assert r.eta == pytest.approx(0.349222309687516504, rel=1e-14)
    assert r.rho == pytest.approx(0.784733085946268789, rel=1e-14)
    assert r.kappa == pytest.approx(1.05922434903257567, rel=1e-14)
    assert r.case is XiCase.XI_LESS


@pytest.mark.parametrize("name, case", [("xi<1", XiCase.XI_LESS), ("xi=1", XiCase.XI_EQUAL_ONE), ("xi>1", XiCase.XI_GREATER)])
def test_case_dispatch(name, case):
    assert reduced_parameters(CASES[name]).case is case


def test_tau2_for_damping_round_trip():
    for xi in (0.3, 0.62, 1.0, 2.0, 8.0):
        tau2 = tau2_for_damping(0.0633, 250.0, xi)
        assert reduced_parameters(LoopParameters(0.0633, tau2, 250.0)).xi == pytest.approx(xi, rel=1e-12)


def test_to_reduced_example():
    y = to_reduced(PhaseState(0.0, 0.0), UNDERDAMPED, W)
    assert y.y == pytest.approx(1.71194415099216215, rel=1e-14)
    assert y.theta_e == 0.0 and y.tau == 0.0
    assert to_reduced(PhaseState(0.0, 0.0), UNDERDAMPED, W, t=2.0).tau == pytest.approx(2 * time_scale(UNDERDAMPED))


def test_from_reduced_inverts_to_reduced():
    rng = np.random.default_rng(2)
    for _ in range(100):
        state = PhaseState(rng.uniform(-0.1, 0.1), rng.uniform(-7, 7))
        back = from_reduced(to_reduced(state, UNDERDAMPED, W), UNDERDAMPED, W)
        assert back.x == pytest.approx(state.x, abs=1e-15)
        assert back.theta_e == state.theta_e


def test_reduced_vector_field_example():
    dy, dth = reduced_vector_field(ReducedState(1.0, 0.0), UNDERDAMPED, W)
    assert dy == pytest.approx(-0.776395852238544340, rel=1e-13)
    assert dth == 1.0


@pytest.mark.parametrize("name", list(CASES))
def test_reduced_field_is_pushforward(name):
    # chain rule: d/dtau of the mapped state equals the mapped vector field
    params = CASES[name]
    rng = np.random.default_rng(4)
    scale = time_scale(params)
    gain = math.sqrt(PI * params.kvco / (2 * params.tau))
    for _ in range(50):
        state = PhaseState(rng.uniform(-params.tau1, params.tau1), rng.uniform(-4, 4))
        omega = rng.uniform(0, 0.99) * params.kvco
        dx, dth = vector_field(state, params, omega)
        dy_dt = -gain * (dx + params.tau2 * pd_slope(state.theta_e) * dth)
        dy, dth_red = reduced_vector_field(to_reduced(state, params, omega), params, omega)
        assert dy == pytest.approx(dy_dt / scale, rel=1e-11, abs=1e-11)
        assert dth_red == pytest.approx(dth / scale, rel=1e-11, abs=1e-11)


def test_separatrix_start_and_first_integral_examples():
    s = separatrix_initial_value(UNDERDAMPED, W)
    assert s == pytest.approx(0.786344659110043992, rel=1e-14)
    assert first_integral_B(s, PI / 2, UNDERDAMPED, W) == pytest.approx(-0.283061917118654553, rel=1e-13)


@pytest.mark.parametrize("omega", [0.0, 250.0, -3.0])
def test_out_of_range_frequencies(omega):
    with pytest.raises(OutOfRange):
        separatrix_initial_value(UNDERDAMPED, omega)
    with pytest.raises(OutOfRange):
        solve_y_ab(UNDERDAMPED, omega)
    with pytest.raises(OutOfRange):
        lock_in_residual(UNDERDAMPED, omega)


def test_first_integrals_singular_points():
    theta_s = PI * W / (2 * UNDERDAMPED.kvco)
    with pytest.raises(SingularPoint):
        first_integral_B(0.0, theta_s, UNDERDAMPED, W)
    r = reduced_parameters(UNDERDAMPED)
    theta = 0.3 - PI - theta_s
    u = theta + PI + theta_s
    with pytest.raises(SingularPoint):
        first_integral_A(-(r.kappa - r.eta) * u, theta, UNDERDAMPED, W)
    with pytest.raises(SingularPoint):
        first_integral_A((r.kappa + r.eta) * u, theta, UNDERDAMPED, W)
    ro = reduced_parameters(OVERDAMPED)
    theta = theta_s + 0.2
    with pytest.raises(SingularPoint):
        first_integral_B(-(ro.xi - ro.rho) * (theta - theta_s), theta, OVERDAMPED, W)


def _reduced_rhs(params, omega):
    def rhs(_t, s):
        return reduced_vector_field(ReducedState(s[0], s[1]), params, omega)

    return rhs


def _domain_trajectory(params, omega, start, lo, hi, span):
    def leave_lo(_t, s):
        return s[1] - lo

    def leave_hi(_t, s):
        return s[1] - hi

    leave_lo.terminal = leave_hi.terminal = True
    return solve_ivp(
        _reduced_rhs(params, omega), (0, span), start, method="DOP853",
        rtol=1e-12, atol=1e-12, events=[leave_lo, leave_hi], dense_output=False,
    )


def _well_conditioned(y, s, r):
    # once a trajectory hugs a node eigenline its factor is pure roundoff
    if r.case is not XiCase.XI_GREATER:
        return True
    scale = abs(y) + abs(s)
    return min(abs(y + (r.xi - r.rho) * s), abs(y + (r.xi + r.rho) * s)) > 1e-6 * scale


@pytest.mark.parametrize("name", list(CASES))
def test_first_integral_B_conserved(name):
    params = CASES[name]
    r = reduced_parameters(params)
    jump = PI * r.xi / r.rho if r.case is XiCase.XI_LESS else 0.0
    rng = np.random.default_rng(8)
    for _ in range(20):
        omega = rng.uniform(0.05, 0.9) * params.kvco
        start = [rng.uniform(-2, 2), rng.uniform(-PI / 2 + 0.05, PI / 2 - 0.05)]
        sol = _domain_trajectory(params, omega, start, -PI / 2, PI / 2, 5.0)
        n0 = first_integral_B(start[0], start[1], params, omega)
        theta_s = PI * omega / (2 * params.kvco)
        for y, th in sol.y.T[1:]:
            if not _well_conditioned(y, th - theta_s, r):
                continue
            try:
                drift = first_integral_B(y, th, params, omega) - n0
            except SingularPoint:
                continue
            if jump:
                drift -= jump * round(drift / jump)
            assert abs(drift) < 1e-6


@pytest.mark.parametrize("name", list(CASES))
def test_first_integral_A_conserved(name):
    params = CASES[name]
    rng = np.random.default_rng(9)
    for _ in range(20):
        omega = rng.uniform(0.05, 0.9) * params.kvco
        start = [rng.uniform(-2, 2), rng.uniform(-3 * PI / 2 + 0.05, -PI / 2 - 0.05)]
        sol = _domain_trajectory(params, omega, start, -3 * PI / 2, -PI / 2, 3.0)
        m0 = first_integral_A(start[0], start[1], params, omega)
        for y, th in sol.y.T[1:]:
            assert abs(first_integral_A(y, th, params, omega) - m0) < 1e-6


@pytest.mark.parametrize("name", list(CASES))
def test_saddle_eigenlines_are_invariant(name):
    params = CASES[name]
    r = reduced_parameters(params)
    omega = 0.3 * params.kvco
    theta_s = PI * omega / (2 * params.kvco)
    for slope in (-(r.kappa - r.eta), r.kappa + r.eta):
        for u in (-0.9, -0.2, 0.4, 1.1):
            dy, dth = reduced_vector_field(ReducedState(slope * u, u - PI - theta_s), params, omega)
            assert abs(dy - slope * dth) < 1e-10


def test_stable_node_eigenlines_are_invariant():
    r = reduced_parameters(OVERDAMPED)
    omega = 0.3 * OVERDAMPED.kvco
    theta_s = PI * omega / (2 * OVERDAMPED.kvco)
    for slope in (-(r.xi - r.rho), -(r.xi + r.rho)):
        for s in (-0.5, 0.1, 0.6):
            dy, dth = reduced_vector_field(ReducedState(slope * s, theta_s + s), OVERDAMPED, omega)
            assert abs(dy - slope * dth) < 1e-10 * max(1.0, abs(slope))


def test_separatrix_start_is_tangent_to_stable_eigenline():
    omega = W
    theta_s = PI * omega / (2 * UNDERDAMPED.kvco)
    r = reduced_parameters(UNDERDAMPED)
    for theta in (PI / 2, 2.0, PI - theta_s - 1e-3):
        y = (r.kappa - r.eta) * (PI - theta_s - theta)
        dy, dth = reduced_vector_field(ReducedState(y, theta), UNDERDAMPED, omega)
        assert abs(dy / dth + (r.kappa - r.eta)) < 1e-10


def test_exp_of_first_integral_matches_product_form():
    r = reduced_parameters(UNDERDAMPED)
    theta_s = PI * W / (2 * UNDERDAMPED.kvco)
    for y, u in [(2.0, 0.5), (3.0, 1.2), (0.1, -1.0)]:
        f1 = y + (r.kappa - r.eta) * u
        f2 = y - (r.kappa + r.eta) * u
        product = abs(f1) ** ((r.kappa - r.eta) / r.kappa) * abs(f2) ** ((r.kappa + r.eta) / r.kappa)
        m = first_integral_A(y, u - PI - theta_s, UNDERDAMPED, W)
        assert math.exp(2 * m) == pytest.approx(product, rel=1e-13)


def test_underdamped_solution_is_self_consistent():
    sol = conservative_lock_in(UNDERDAMPED)
    assert sol.case_tag is XiCase.XI_LESS
    assert abs(sol.residual_a) < 1e-9 and abs(sol.residual_b) < 1e-9
    assert sol.sign_changes == 1
    assert sol.y_ab == pytest.approx(solve_y_ab(UNDERDAMPED, sol.omega_lc), rel=1e-12)
    assert 0 < sol.omega_lc < pull_in_bound(UNDERDAMPED)


def pull_in_bound(params):
    from pll_lockin import pull_in_lower_bound

    return pull_in_lower_bound(params).pull_in_lower_bound


@pytest.mark.parametrize("name", list(CASES))
def test_logarithmic_form_agrees_with_product_form(name):
    params = CASES[name]
    sol = conservative_lock_in(params)
    eq_a, eq_b = lock_in_equations(params, sol.omega_lc, sol.y_ab)
    # product-form row A is scaled by ~omega**2 * y**2; compare relatively
    k = 2 / PI * params.kvco
    scale_a = (2 * sol.omega_lc) ** 2 * (sol.y_ab * k / params.kvco + 1) ** 2
    assert abs(eq_a) / scale_a < 1e-9
    assert abs(eq_b) < 1e-9


@pytest.mark.parametrize("params", [UNDERDAMPED, LoopParameters(0.5, 0.0225, 250.0)], ids=["underdamped", "sweep_loop"])
def test_residual_has_a_single_sign_change(params):
    grid = np.linspace(1e-4, 1 - 1e-4, 1000) * params.kvco
    values = np.array([lock_in_residual(params, w) for w in grid])
    signs = np.sign(values)
    assert np.count_nonzero(signs[:-1] * signs[1:] < 0) == 1
    assert signs[0] < 0 and signs[-1] > 0


def test_residual_sign_brackets_solution():
    sol = conservative_lock_in(UNDERDAMPED)
    assert lock_in_residual(UNDERDAMPED, sol.omega_lc - 1e-3) < 0 < lock_in_residual(UNDERDAMPED, sol.omega_lc + 1e-3)


def test_pre_step_saddle_is_mapped_correctly():
    omega = 50.0
    theta_s = PI * omega / (2 * UNDERDAMPED.kvco)
    before = PhaseState(-UNDERDAMPED.tau1 * omega / UNDERDAMPED.kvco, theta_s - PI)
    assert to_reduced(before, UNDERDAMPED, omega).y == pytest.approx(pre_step_saddle_height(UNDERDAMPED, omega), rel=1e-13)


def _lock_in_at(xi, tau1, kvco):
    return conservative_lock_in(LoopParameters(tau1, tau2_for_damping(tau1, kvco, xi), kvco)).omega_lc


def test_critical_damping_is_continuous_across_branches():
    # omega_lc / K depends on (xi, eta) only, so scaling tau up by 25 and K down
    # by 25 keeps the reduced constants while shrinking absolute sensitivity
    tau1, kvco = 0.0633 * 25, 10.0
    mid = _lock_in_at(1.0, tau1, kvco)
    for xi in (1 - 1e-4, 1 + 1e-4):
        assert abs(_lock_in_at(xi, tau1, kvco) - mid) < 1e-3


def test_critical_damping_is_smooth_at_underdamped_scale():
    # second difference is O(h**2) only if both neighbouring branches meet the xi=1 branch smoothly
    h = 1e-4
    lo, mid, hi = (_lock_in_at(xi, 0.0633, 250.0) for xi in (1 - h, 1.0, 1 + h))
    assert abs(lo - 2 * mid + hi) < 1e-5
    assert abs(hi - lo) < 0.02


def test_ratio_depends_on_reduced_constants_only():
    base = conservative_lock_in(UNDERDAMPED).omega_lc / UNDERDAMPED.kvco
    scaled = LoopParameters(UNDERDAMPED.tau1 * 4, UNDERDAMPED.tau2 * 4, UNDERDAMPED.kvco / 4)
    assert conservative_lock_in(scaled).omega_lc / scaled.kvco == pytest.approx(base, rel=1e-10)


def test_no_bracket_reports_solver_error(monkeypatch):
    import pll_lockin.lockin as lockin

    monkeypatch.setattr(lockin, "_outer_residual", lambda *a: (-1.0, 0.0))
    with pytest.raises(NoBracket):
        lockin.conservative_lock_in(UNDERDAMPED)
