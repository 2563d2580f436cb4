import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import solve_ivp

from chainlab.integrator import leader_forcing, simulate
from chainlab.model import (ConstantVelocity, ControlParams, ModelError, PerturbedLattice, Sinusoid,
                            equilibrium_spacing)
from chainlab.oracle import (KernelParams, ResonanceError, chain_solution, exp_convolution,
                             f_t_max_bound, homogeneous, impulse_response, lemma_bound,
                             mean_length_law, resonance_forcing, resonance_gap1, resonance_x1,
                             stationary_current, vc_solve_next)

GRID = np.linspace(0.0, 20.0, 20001)


def _ode_next(x_prev_fn, x0, xdot0, params, t):
    def rhs(s, y):
        return [y[1], params.omega ** 2 * (x_prev_fn(s) - y[0]) - params.alpha * y[1]]
    sol = solve_ivp(rhs, (t[0], t[-1]), [x0, xdot0], t_eval=t, rtol=1e-12, atol=1e-13, method="DOP853")
    return sol.y[0]


def test_kernel_roots():
    kp = KernelParams.from_params(ControlParams(3.0, 1.0, 1.0))
    assert kp.lambda_plus.real == pytest.approx((-3 + math.sqrt(5)) / 2)
    assert kp.lambda_minus.real == pytest.approx((-3 - math.sqrt(5)) / 2)
    assert KernelParams.from_params(ControlParams(2.0, 1.0, 1.0)).confluent
    assert KernelParams.from_params(ControlParams(1.0, 1.0, 1.0)).tau == pytest.approx(math.sqrt(0.75))


def test_zero_data_gives_zero():
    out = vc_solve_next(np.zeros_like(GRID), 0.0, 0.0, ControlParams(3.0, 1.0, 1.0), GRID)
    assert np.all(out == 0.0)


def test_homogeneous_closed_form():
    lp, lm = (-3 + math.sqrt(5)) / 2, (-3 - math.sqrt(5)) / 2
    out = vc_solve_next(np.zeros_like(GRID), 1.0, 0.0, ControlParams(3.0, 1.0, 1.0), GRID)
    expected = (lp * np.exp(lm * GRID) - lm * np.exp(lp * GRID)) / (lp - lm)
    np.testing.assert_allclose(out, expected, atol=1e-14)


@pytest.mark.parametrize("alpha,omega", [(3.0, 1.0), (2.0, 1.0), (1.0, 1.0), (0.3, 1.7)])
def test_vc_solve_next_against_ode(alpha, omega):
    params = ControlParams(alpha, omega, 1.0)
    t = np.linspace(0.0, 15.0, 15001)
    drive = lambda s: np.sin(0.7 * s) + 0.3 * np.cos(2.1 * s) + 0.5
    out = vc_solve_next(drive(t), 0.2, -0.4, params, t)
    ref = _ode_next(drive, 0.2, -0.4, params, t)
    np.testing.assert_allclose(out, ref, atol=1e-9)


def test_impulse_response_and_homogeneous_agree():
    for params in (ControlParams(3.0, 1.0, 1.0), ControlParams(2.0, 1.0, 1.0), ControlParams(1.0, 2.0, 1.0)):
        t = np.linspace(0, 10, 101)
        np.testing.assert_allclose(impulse_response(params, t), homogeneous(params, 0.0, 1.0, t), atol=1e-14)


def test_exp_convolution_exact_polynomial():
    # Simpson is exact for quadratics times the kernel only when lam = 0
    t = np.linspace(0.0, 2.0, 201)
    out = exp_convolution(0.0, t ** 2, t[1] - t[0]).real
    np.testing.assert_allclose(out, t ** 3 / 3, atol=1e-13)


def test_exp_convolution_fourth_order():
    lam = complex(-0.5, 1.3)
    errs = []
    for n in (201, 401):
        t = np.linspace(0.0, 4.0, n)
        out = exp_convolution(lam, np.cos(t), t[1] - t[0])
        # int_0^t e^{lam (t - s)} cos s ds
        exact = (lam * np.exp(lam * t) - lam * np.cos(t) + np.sin(t)) / (lam ** 2 + 1)
        errs.append(np.max(np.abs(out - exact)))
    assert errs[0] / errs[1] > 12


def test_chain_matches_integrator_stable_lattice():
    params, v = ControlParams(4.0, 1.0, 1.0), 1.0
    leader = ConstantVelocity(v)
    rec = simulate(PerturbedLattice(5, v, 0.1, 0.0), params, leader, 20.0, 1e-3, 1)
    x = rec.gaps - params.d
    xdot0 = rec.velocities[0, :-1] - rec.velocities[0, 1:]
    orc = chain_solution(leader_forcing(leader, params, rec.times), x[0], xdot0, params, rec.times).T
    assert np.max(np.abs(x - orc)) / np.max(np.abs(orc)) <= 1e-5


def test_grid_validation():
    p = ControlParams(3.0, 1.0, 1.0)
    with pytest.raises(ModelError):
        vc_solve_next(np.zeros(3), 0, 0, p, np.array([0.0, 1.0, 3.0]))
    with pytest.raises(ModelError):
        vc_solve_next(np.zeros(3), 0, 0, p, np.array([1.0, 2.0, 3.0]))
    with pytest.raises(ModelError):
        vc_solve_next(np.zeros(4), 0, 0, p, np.array([0.0, 1.0, 2.0]))


def test_resonance_x1_examples():
    assert resonance_x1(0.0, 2.0, 1.0) == 0.0
    assert resonance_x1(math.pi, 2.0, 1.0) == pytest.approx(0.0, abs=1e-15)
    assert resonance_x1(math.pi / 2, 2.0, 1.0) == pytest.approx(1 / 3)
    with pytest.raises(ResonanceError):
        resonance_x1(1.0, 1.0, 1.0)


@settings(max_examples=20, deadline=None)
@given(st.floats(0.3, 3.0), st.floats(0.3, 3.0))
def test_resonance_x1_solves_its_ode(omega, omega0):
    if abs(omega - omega0) < 0.05:
        return
    t = np.linspace(0.0, 20.0, 2001)
    sol = solve_ivp(lambda s, y: [y[1], math.sin(omega0 * s) - omega ** 2 * y[0]], (0, 20), [0.0, 0.0],
                    t_eval=t, rtol=1e-11, atol=1e-12, method="DOP853")
    np.testing.assert_allclose(resonance_x1(t, omega, omega0), sol.y[0], atol=1e-4)


def test_resonance_gap1_matches_undamped_simulation():
    params = ControlParams.undamped(2.0, 1.0)
    rec = simulate(PerturbedLattice(1, 1.0, 0.0, 0.0), params, Sinusoid(1.0, 0.3, 1.0), 30.0, 1e-3, 10)
    np.testing.assert_allclose(rec.gaps[:, 0] - 1.0, resonance_gap1(rec.times, 2.0, 1.0, 0.3), atol=1e-9)
    np.testing.assert_allclose(resonance_forcing(rec.times, 1.0, 0.3), 0.3 * np.sin(rec.times))


def test_lemma_bound_examples():
    p = ControlParams(4.0, 1.0, 1.0)
    assert lemma_bound(2.5, 0.0, 0.0, p) == 2.5
    assert lemma_bound(0.0, 1.0, 1.0, p) == pytest.approx(math.sqrt(3))
    assert lemma_bound(10.0, 1.0, 1.0, p) == 10.0
    with pytest.raises(ModelError):
        lemma_bound(0.0, 1.0, 1.0, ControlParams(2.0, 1.0, 1.0))


@settings(max_examples=30, deadline=None)
@given(st.floats(3.0, 8.0), st.floats(0.0, 0.3), st.floats(0.0, 0.3))
def test_lemma_bound_dominates_first_car(alpha, A, C):
    # |x_0| <= Q, |x_1(0)| <= A, |x_1'(0)| <= C  ->  |x_1| <= lemma_bound
    params = ControlParams(alpha, 1.0, 1.0)
    Q = 0.5
    t = np.linspace(0.0, 30.0, 3001)
    out = vc_solve_next(Q * np.cos(0.9 * t), A, -C, params, t)
    assert np.max(np.abs(out)) <= lemma_bound(Q, A, C, params) + 1e-9


def test_f_t_max_bound():
    t = np.arange(0.0, 50.0, 1e-3)
    assert f_t_max_bound(0.0, 0.0, 2.0, -1.0, -2.0) == 2.0
    f = np.exp(-t) + np.exp(-2 * t) + 1
    assert f_t_max_bound(1, 1, 1, -1, -2) == 3.0 == pytest.approx(np.max(np.abs(f)))
    f = -5 * np.exp(-t) + np.exp(-2 * t) + 1
    assert f_t_max_bound(-5, 1, 1, -1, -2) == 1.0 >= np.max(f)
    with pytest.raises(ModelError):
        f_t_max_bound(1, 1, 1, -2, -1)


@settings(max_examples=60, deadline=None)
@given(st.floats(-10, 10), st.floats(0.01, 10), st.floats(0.01, 10), st.floats(0.05, 3), st.floats(0.05, 3))
def test_f_t_max_bound_property(a, b, c, l1, gap):
    lp, lm = -l1, -l1 - gap
    t = np.linspace(0.0, 60.0 / l1, 20001)
    f = a * np.exp(lp * t) + b * np.exp(lm * t) + c
    bound = f_t_max_bound(a, b, c, lp, lm)
    assert np.max(f) <= bound + 1e-9
    if a >= 0:
        assert np.max(np.abs(f)) <= bound + 1e-9


def test_mean_length_law():
    t = np.linspace(0, 5, 6)
    np.testing.assert_array_equal(mean_length_law(2.0, 0.0, 1.5, t), 2.0)
    assert mean_length_law(2.0, 3.0, 1.5, 0.0) == 2.0
    assert mean_length_law(1.0, 4.0, 2.0, 1e3) == pytest.approx(3.0)
    with pytest.raises(ModelError):
        mean_length_law(1.0, 1.0, 0.0, 1.0)


def test_stationary_current():
    p = ControlParams(2.0, 1.0, 1.0)
    assert stationary_current(p, 0.0) == 0.0
    assert stationary_current(p, 1.0) == pytest.approx(1 / 3)
    assert stationary_current(p, 1.0) == pytest.approx(1.0 / equilibrium_spacing(p, 1.0))
    assert stationary_current(ControlParams(1e-12, 1.0, 2.0), 3.0) == pytest.approx(1.5)


def test_resonance_x1_finite_difference_residual():
    dt = 1e-3
    t = np.arange(0.0, 30.0, dt)
    x = resonance_x1(t, 2.0, 1.0)
    second = (x[2:] - 2 * x[1:-1] + x[:-2]) / dt ** 2
    residual = second + 4.0 * x[1:-1] - np.sin(t[1:-1])
    assert np.max(np.abs(residual)) <= 1e-4
