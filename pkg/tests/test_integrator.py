import csv
import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from chainlab.integrator import (advance, leader_forcing, simulate, stability_threshold, step,
                                 write_trajectory_csv, x_coordinates)
from chainlab.model import (ChainState, ConstantVelocity, ControlParams, EquilibriumLattice,
                            ModelError, PerturbedLattice, SingleVelocityKick, Sinusoid,
                            bounded_deviation, build_initial_state, equilibrium_spacing)


def _rhs(params, leader_pos, leader_vel):
    def f(t, y):
        n = y.size // 2
        z = np.concatenate(([leader_pos(t)], y[:n]))
        u = y[n:]
        acc = params.omega ** 2 * (z[:-1] - z[1:] - params.d) - params.alpha * u
        return np.concatenate((u, acc))
    return f


@pytest.mark.parametrize("v", [0.0, 1.0, 2.5])
def test_equilibrium_is_stationary(v):
    params = ControlParams(4.0, 1.0, 1.0)
    rec = simulate(EquilibriumLattice(20, v), params, ConstantVelocity(v), 50.0, 1e-2, 50)
    a = equilibrium_spacing(params, v)
    assert np.max(np.abs(rec.gaps - a)) <= 1e-10
    assert np.max(np.abs(rec.gap_min - a)) <= 1e-9
    assert np.max(np.abs(rec.gap_max - a)) <= 1e-9
    assert np.max(np.abs(rec.deviations)) <= 1e-9
    assert rec.first_negative is None


def test_undamped_single_car_exact():
    # z1'' = (t - z1 - 1), z1(0) = -0.7, z1'(0) = 1  ->  z1 = t - 1 + 0.3 cos t
    params = ControlParams.undamped(1.0, 1.0)
    start = ChainState(0.0, np.array([0.0, -0.7]), np.array([1.0, 1.0]))
    errs = []
    for dt in (0.02, 0.01):
        rec = simulate(start, params, ConstantVelocity(1.0), 20.0, dt, 1)
        exact = 1.0 - 0.3 * np.cos(rec.times)  # gap t - z1
        errs.append(np.max(np.abs(rec.gaps[:, 0] - exact)))
    assert errs[1] < 1e-9
    assert errs[0] / errs[1] == pytest.approx(16.0, rel=0.1)


def test_rk4_fourth_order_on_chain():
    params = ControlParams(1.0, 1.0, 1.0)
    leader = Sinusoid(1.0, 0.3, 0.8)
    spec = PerturbedLattice(5, 1.0, 0.1, 0.1)
    ref = simulate(spec, params, leader, 10.0, 1e-3, 10000).gaps[-1]
    e1 = np.max(np.abs(simulate(spec, params, leader, 10.0, 0.04, 250).gaps[-1] - ref))
    e2 = np.max(np.abs(simulate(spec, params, leader, 10.0, 0.02, 500).gaps[-1] - ref))
    assert e1 / e2 == pytest.approx(16.0, rel=0.15)


def test_matches_solve_ivp():
    params = ControlParams(1.3, 1.1, 0.8)
    leader = Sinusoid(1.0, 0.4, 1.7)
    state = build_initial_state(PerturbedLattice(4, 1.0, 0.2, 0.1), params, leader)
    rec = simulate(state, params, leader, 15.0, 1e-3, 1000)
    pos = lambda t: leader.v * t + leader.amplitude * math.sin(leader.omega0 * t)
    sol = solve_ivp(_rhs(params, pos, None), (0.0, 15.0), np.concatenate((state.z[1:], state.v[1:])),
                    t_eval=rec.times, rtol=1e-12, atol=1e-12, method="DOP853")
    z = np.vstack([[pos(t) for t in rec.times], sol.y[:4]])
    np.testing.assert_allclose(rec.gaps, (z[:-1] - z[1:]).T, atol=1e-9)


def test_resonance_gap_goes_negative():
    params = ControlParams.undamped(1.0, 1.0)
    rec = simulate(EquilibriumLattice(10, 1.0), params, Sinusoid(1.0, 1.0, 1.0), 200.0, 1e-3, 100)
    assert rec.gap_min.min() < 0
    t, k = rec.first_negative
    assert 0 < t <= 200.0 and 1 <= k <= 10


def test_running_extrema_cover_all_steps():
    params = ControlParams(1.0, 1.0, 1.0)
    spec = PerturbedLattice(6, 1.0, 0.2, 0.0)
    coarse = simulate(spec, params, ConstantVelocity(1.0), 30.0, 1e-3, 1000)
    fine = simulate(spec, params, ConstantVelocity(1.0), 30.0, 1e-3, 1)
    np.testing.assert_allclose(coarse.gap_min, fine.gaps.min(axis=0), atol=1e-15)
    np.testing.assert_allclose(coarse.gap_max, fine.gaps.max(axis=0), atol=1e-15)
    assert np.all(coarse.gap_min <= coarse.gaps.min(axis=0))


def test_step_and_advance_agree_with_simulate():
    params = ControlParams(3.0, 1.0, 1.0)
    leader = bounded_deviation(params, 1.0, 0.1, "bump_train", 5.0)
    s0 = build_initial_state(PerturbedLattice(5, 1.0, 0.1, 0.1), params, leader)
    s = s0
    for _ in range(100):
        s = step(s, params, leader, 1e-2)
    s2 = advance(s0, params, leader, 1e-2, 100)
    rec = simulate(s0, params, leader, 1.0, 1e-2, 100)
    np.testing.assert_allclose(s.z, s2.z, rtol=0, atol=1e-13)
    np.testing.assert_allclose(s2.gaps, rec.gaps[-1], rtol=0, atol=1e-13)
    assert s2.t == pytest.approx(1.0)


def test_kick_grows_along_ray():
    params = ControlParams(1.0, 1.0, 1.0)
    rec = simulate(SingleVelocityKick(120, 1.0, 1e-3), params, ConstantVelocity(1.0), 200.0, 1e-2, 10)
    q = np.abs(rec.deviations)
    at = lambda k: q[int(round(2 * k / 0.1)), k + 1]
    assert max(at(k) for k in range(90, 99)) > 100 * max(at(k) for k in range(20, 29))


def test_x_coordinates():
    params = ControlParams(2.0, 1.0, 1.0)
    s = build_initial_state(EquilibriumLattice(4, 0.0), params, ConstantVelocity(0.0))
    np.testing.assert_allclose(x_coordinates(s, params), 0.0)
    s = build_initial_state(EquilibriumLattice(4, 1.0), params, ConstantVelocity(1.0))
    np.testing.assert_allclose(x_coordinates(s, params), 2.0)
    s = build_initial_state(PerturbedLattice(4, 1.0, 0.3, 0.1), params, ConstantVelocity(1.0))
    np.testing.assert_array_equal(x_coordinates(s, params) + params.d, s.gaps)


def test_leader_forcing_constant():
    params = ControlParams(2.0, 1.0, 1.0)
    np.testing.assert_allclose(leader_forcing(ConstantVelocity(1.0), params, np.linspace(0, 5, 6)), 2.0)


def test_dt_threshold_and_input_errors():
    params = ControlParams(4.0, 1.0, 1.0)
    assert stability_threshold(params) == pytest.approx(0.025)
    with pytest.raises(ModelError, match="stability threshold"):
        simulate(EquilibriumLattice(3, 1.0), params, ConstantVelocity(1.0), 1.0, 0.05)
    with pytest.raises(ModelError):
        simulate(EquilibriumLattice(3, 1.0), params, ConstantVelocity(1.0), -1.0)
    with pytest.raises(ModelError):
        simulate(EquilibriumLattice(3, 1.0), params, ConstantVelocity(1.0), 1.0, stride=0)


def test_truncate():
    params = ControlParams(1.0, 1.0, 1.0)
    rec = simulate(PerturbedLattice(5, 1.0, 0.1, 0.0), params, ConstantVelocity(1.0), 10.0, 1e-2, 10)
    tr = rec.truncate(5.0)
    assert tr.horizon == pytest.approx(5.0)
    np.testing.assert_array_equal(tr.gap_min, rec.gaps[: tr.times.size].min(axis=0))


def test_trajectory_csv(tmp_path):
    params = ControlParams(2.0, 1.0, 1.0)
    rec = simulate(PerturbedLattice(3, 1.0, 0.1, 0.0), params, ConstantVelocity(1.0), 0.1, 1e-2, 5)
    path = tmp_path / "t.csv"
    write_trajectory_csv(rec, path)
    rows = list(csv.reader(open(path)))
    assert rows[0] == ["t", "k", "r", "v", "q"]
    assert len(rows) == 1 + rec.times.size * 3
    assert [int(r[1]) for r in rows[1:4]] == [1, 2, 3]
    assert float(rows[1][2]) == rec.gaps[0, 0]
    assert float(rows[-1][3]) == rec.velocities[-1, 3]
    first = path.read_bytes()
    write_trajectory_csv(rec, path)
    assert path.read_bytes() == first


def test_restart_from_state_continues_run():
    params = ControlParams(1.2, 1.0, 1.0)
    leader = Sinusoid(1.0, 0.2, 0.9)
    spec = PerturbedLattice(6, 1.0, 0.1, 0.1)
    full = simulate(spec, params, leader, 4.0, 1e-2, 100)
    s0 = build_initial_state(spec, params, leader)
    mid = advance(s0, params, leader, 1e-2, 200)
    rest = simulate(mid, params, leader, 2.0, 1e-2, 100, v_ref=1.0)
    assert rest.times[0] == pytest.approx(2.0)
    np.testing.assert_allclose(rest.gaps[-1], full.gaps[-1], atol=1e-12)
    np.testing.assert_allclose(rest.deviations[-1], full.deviations[-1], atol=1e-12)


def test_unstable_equilibrium_stays_exact():
    params = ControlParams(0.2, 1.0, 1.0)
    rec = simulate(EquilibriumLattice(60, 1.0), params, ConstantVelocity(1.0), 500.0, 1e-2, 100)
    a = equilibrium_spacing(params, 1.0)
    assert np.all(rec.gaps == a) and np.all(rec.deviations == 0.0)


def test_empirical_order_three_steps():
    params = ControlParams(0.8, 1.3, 1.0)
    leader = Sinusoid(1.0, 0.5, 1.1)
    spec = PerturbedLattice(4, 1.0, 0.2, 0.1)
    finals = [simulate(spec, params, leader, 8.0, dt, int(round(8.0 / dt))).gaps[-1] for dt in (0.04, 0.02, 0.01)]
    ref = simulate(spec, params, leader, 8.0, 1e-3, 8000).gaps[-1]
    errs = [np.max(np.abs(f - ref)) for f in finals]
    orders = [math.log2(errs[0] / errs[1]), math.log2(errs[1] / errs[2])]
    assert all(3.7 <= p <= 4.3 for p in orders), orders
