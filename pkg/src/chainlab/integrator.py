"""Fixed-step classical RK4 for the follower chain.

The leader is never integrated: its position is evaluated from the closed
form at every stage time (t, t + dt/2, t + dt).  Each follower only reads
its predecessor, so the update of car k is arithmetically identical for
any chain length >= k.

Cars are integrated as offsets y_k = z_k - (v t - k a) from the lattice
moving with the leader's nominal speed v at spacing a = d + alpha v/omega**2.
In these coordinates the equations read y_k'' = omega**2 (y_{k-1} - y_k)
- alpha y_k' with no constant terms, so stationary motion is exactly zero
and long runs do not lose digits to the growing absolute positions.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numba
import numpy as np

from .model import (BoundedDeviation, ChainState, ConstantVelocity, ControlParams,
                    InitialConditionSpec, LeaderSpec, ModelError, Sinusoid,
                    build_initial_state, equilibrium_spacing, leader_kinematics)

DEFAULT_DT = 1e-3

_CONST, _SINE, _TRAIN, _SINGLE = 0, 1, 2, 3


def _leader_code(leader: LeaderSpec) -> tuple[int, np.ndarray]:
    """Kernel code and parameters of the leader's offset z0(t) - v t."""
    if isinstance(leader, ConstantVelocity):
        return _CONST, np.array([0.0, 0.0, 0.0])
    if isinstance(leader, Sinusoid):
        return _SINE, np.array([0.0, leader.amplitude, leader.omega0])
    if isinstance(leader, BoundedDeviation):
        code = _TRAIN if leader.shape == "bump_train" else _SINGLE
        return code, np.array([0.0, leader.height, leader.period])
    raise TypeError(f"not a leader spec: {leader!r}")


class _Frame:
    """Lattice moving with the leader's nominal speed."""

    def __init__(self, params: ControlParams, leader: LeaderSpec):
        self.v = float(leader.v)
        self.a = equilibrium_spacing(params, self.v) if params.alpha > 0 else params.d

    def to_offsets(self, state: ChainState) -> tuple[np.ndarray, np.ndarray]:
        k = np.arange(state.z.size)
        y = np.array(state.z, dtype=float) - (self.v * state.t - k * self.a)
        return y, np.array(state.v, dtype=float) - self.v

    def to_state(self, t: float, y: np.ndarray, u: np.ndarray) -> ChainState:
        k = np.arange(y.size)
        return ChainState(t, y + (self.v * t - k * self.a), u + self.v)


@numba.njit(cache=True)
def _leader_pos(code, par, t):
    if code == _SINE:
        return par[0] * t + par[1] * math.sin(par[2] * t)
    if code == _TRAIN or code == _SINGLE:
        if code == _SINGLE and t > par[2]:
            return par[0] * t
        s = math.sin(math.pi / par[2] * t)
        return par[0] * t + par[1] * s ** 4
    return par[0] * t


@numba.njit(cache=True)
def _leader_vel(code, par, t):
    if code == _SINE:
        return par[0] + par[1] * par[2] * math.cos(par[2] * t)
    if code == _TRAIN or code == _SINGLE:
        if code == _SINGLE and t > par[2]:
            return par[0]
        k = math.pi / par[2]
        return par[0] + par[1] * 4.0 * k * math.sin(k * t) ** 3 * math.cos(k * t)
    return par[0]


@numba.njit(cache=True)
def _rk4_step(z, u, t, dt, d, alpha, w2, code, par, buf):
    """Advance followers 1..N in place; z[0], u[0] set to the leader at t + dt."""
    n = z.size
    k1z, k1v, k2z, k2v = buf[0], buf[1], buf[2], buf[3]
    k3z, k3v, k4z, k4v = buf[4], buf[5], buf[6], buf[7]
    zs, vs = buf[8], buf[9]
    h2 = 0.5 * dt
    for k in range(1, n):
        k1z[k] = u[k]
        k1v[k] = w2 * (z[k - 1] - z[k] - d) - alpha * u[k]
    zs[0] = _leader_pos(code, par, t + h2)
    for k in range(1, n):
        zs[k] = z[k] + h2 * k1z[k]
        vs[k] = u[k] + h2 * k1v[k]
    for k in range(1, n):
        k2z[k] = vs[k]
        k2v[k] = w2 * (zs[k - 1] - zs[k] - d) - alpha * vs[k]
    for k in range(1, n):
        zs[k] = z[k] + h2 * k2z[k]
        vs[k] = u[k] + h2 * k2v[k]
    for k in range(1, n):
        k3z[k] = vs[k]
        k3v[k] = w2 * (zs[k - 1] - zs[k] - d) - alpha * vs[k]
    zs[0] = _leader_pos(code, par, t + dt)
    for k in range(1, n):
        zs[k] = z[k] + dt * k3z[k]
        vs[k] = u[k] + dt * k3v[k]
    for k in range(1, n):
        k4z[k] = vs[k]
        k4v[k] = w2 * (zs[k - 1] - zs[k] - d) - alpha * vs[k]
    for k in range(1, n):
        z[k] += dt / 6.0 * (k1z[k] + 2.0 * k2z[k] + 2.0 * k3z[k] + k4z[k])
        u[k] += dt / 6.0 * (k1v[k] + 2.0 * k2v[k] + 2.0 * k3v[k] + k4v[k])
    z[0] = zs[0]
    u[0] = _leader_vel(code, par, t + dt)


@numba.njit(cache=True)
def _advance(z, u, t0, dt, nsteps, d, alpha, w2, code, par):
    buf = np.zeros((10, z.size))
    for s in range(nsteps):
        _rk4_step(z, u, t0 + s * dt, dt, d, alpha, w2, code, par, buf)


@numba.njit(cache=True)
def _run(z, u, t0, dt, nsteps, stride, alpha, w2, code, par, v_f, a_f, v_ref, a_ref, want_q):
    # z, u are offsets from the frame lattice (v_f, a_f); q is reported against (v_ref, a_ref)
    n = z.size
    n_samples = nsteps // stride + 1
    gaps = np.empty((n_samples, n - 1))
    vels = np.empty((n_samples, n))
    if want_q:
        qs = np.empty((n_samples, n))
    else:
        qs = np.empty((0, n))
    gmin = np.empty(n - 1)
    gmax = np.empty(n - 1)
    dv = v_f - v_ref
    da = a_ref - a_f
    for k in range(1, n):
        g = a_f + (z[k - 1] - z[k])
        gmin[k - 1] = g
        gmax[k - 1] = g
        gaps[0, k - 1] = g
    first_t = t0 - 1.0
    first_k = -1
    for k in range(1, n):
        if first_k < 0 and gaps[0, k - 1] < 0.0:
            first_t = t0
            first_k = k
    for k in range(n):
        vels[0, k] = v_f + u[k]
        if want_q:
            qs[0, k] = z[k] + dv * t0 - k * da
    buf = np.zeros((10, n))
    row = 1
    for s in range(nsteps):
        t = t0 + s * dt
        _rk4_step(z, u, t, dt, 0.0, alpha, w2, code, par, buf)
        for k in range(1, n):
            g = a_f + (z[k - 1] - z[k])
            if g < gmin[k - 1]:
                gmin[k - 1] = g
                if g < 0.0 and first_k < 0:
                    first_t = t0 + (s + 1) * dt
                    first_k = k
            if g > gmax[k - 1]:
                gmax[k - 1] = g
        if (s + 1) % stride == 0:
            tn = t0 + (s + 1) * dt
            for k in range(1, n):
                gaps[row, k - 1] = a_f + (z[k - 1] - z[k])
            for k in range(n):
                vels[row, k] = v_f + u[k]
                if want_q:
                    qs[row, k] = z[k] + dv * tn - k * da
            row += 1
    return gaps, vels, qs, gmin, gmax, first_t, first_k


def stability_threshold(params: ControlParams) -> float:
    """Largest step accepted by ``simulate``."""
    return 0.1 / max(params.alpha, params.omega)


def step(state: ChainState, params: ControlParams, leader: LeaderSpec, dt: float) -> ChainState:
    """One RK4 step of the chain; the leader is placed exactly at t + dt."""
    if not dt > 0:
        raise ModelError("dt must be positive")
    return advance(state, params, leader, dt, 1)


def advance(state: ChainState, params: ControlParams, leader: LeaderSpec, dt: float,
            nsteps: int) -> ChainState:
    """``nsteps`` consecutive RK4 steps without recording."""
    if not dt > 0:
        raise ModelError("dt must be positive")
    code, par = _leader_code(leader)
    frame = _Frame(params, leader)
    y, u = frame.to_offsets(state)
    _advance(y, u, state.t, dt, int(nsteps), 0.0, params.alpha, params.omega ** 2, code, par)
    return frame.to_state(state.t + nsteps * dt, y, u)


@dataclass(frozen=True)
class TrajectoryRecord:
    """Sampled run of cars 0..N.

    ``gaps[i, k-1]`` is r_k at ``times[i]``; ``velocities[i, k]`` is the
    speed of car k; ``deviations[i, k]`` is q_k = z_k - (v t - k a) when a
    reference velocity was configured.  ``gap_min``/``gap_max`` are running
    extrema over every integrator step, not only over samples, and
    ``first_negative`` is the first step at which any gap was below zero.
    """

    times: np.ndarray
    gaps: np.ndarray
    velocities: np.ndarray
    deviations: Optional[np.ndarray]
    gap_min: np.ndarray
    gap_max: np.ndarray
    first_negative: Optional[tuple[float, int]]
    params: ControlParams
    leader: LeaderSpec
    dt: float
    stride: int
    v_ref: Optional[float] = None
    a_ref: Optional[float] = None

    @property
    def n_cars(self) -> int:
        return self.gaps.shape[1]

    @property
    def horizon(self) -> float:
        return float(self.times[-1])

    def truncate(self, horizon: float) -> "TrajectoryRecord":
        """Record restricted to sample times <= horizon (extrema from samples)."""
        m = int(np.searchsorted(self.times, horizon, side="right"))
        if m < 1:
            raise ValueError("horizon precedes the first sample")
        gaps = self.gaps[:m]
        neg = None
        bad = np.argwhere(gaps < 0)
        if bad.size:
            i, j = bad[0]
            neg = (float(self.times[i]), int(j) + 1)
        return TrajectoryRecord(
            self.times[:m], gaps, self.velocities[:m],
            None if self.deviations is None else self.deviations[:m],
            gaps.min(axis=0), gaps.max(axis=0), neg, self.params, self.leader,
            self.dt, self.stride, self.v_ref, self.a_ref)


def _freeze(*arrays):
    for arr in arrays:
        if arr is not None:
            arr.flags.writeable = False


def simulate(spec: InitialConditionSpec | ChainState, params: ControlParams, leader: LeaderSpec,
             horizon: float, dt: float = DEFAULT_DT, stride: int = 1,
             v_ref: Optional[float] = None) -> TrajectoryRecord:
    """Integrate from t = 0 to ``horizon`` and sample every ``stride`` steps.

    Deviations q_k are recorded against ``v_ref`` (defaults to the initial
    condition's v when the family has one).  The step count is
    round(horizon / dt); the last sample sits at the final step.
    """
    if not horizon > 0:
        raise ModelError("horizon must be positive")
    if not dt > 0:
        raise ModelError("dt must be positive")
    if int(stride) != stride or stride < 1:
        raise ModelError("sample stride must be an integer >= 1")
    limit = stability_threshold(params)
    if dt > limit:
        raise ModelError(
            f"dt={dt:g} exceeds the stability threshold 0.1/max(alpha, omega) = {limit:g}")
    if isinstance(spec, ChainState):
        state = spec
    else:
        state = build_initial_state(spec, params, leader)
        if v_ref is None:
            v_ref = getattr(spec, "v", None)
    nsteps = int(round(horizon / dt))
    if nsteps < 1:
        raise ModelError("horizon shorter than one step")
    a_ref = equilibrium_spacing(params, v_ref) if v_ref is not None else 0.0
    code, par = _leader_code(leader)
    frame = _Frame(params, leader)
    y, u = frame.to_offsets(state)
    gaps, vels, qs, gmin, gmax, ft, fk = _run(
        y, u, state.t, dt, nsteps, int(stride), params.alpha, params.omega ** 2, code, par,
        frame.v, frame.a, frame.v if v_ref is None else float(v_ref),
        frame.a if v_ref is None else a_ref, v_ref is not None)
    times = state.t + np.arange(gaps.shape[0]) * (stride * dt)
    deviations = qs if v_ref is not None else None
    _freeze(times, gaps, vels, deviations, gmin, gmax)
    return TrajectoryRecord(times, gaps, vels, deviations, gmin, gmax,
                            (float(ft), int(fk)) if fk > 0 else None,
                            params, leader, dt, int(stride),
                            None if v_ref is None else float(v_ref),
                            a_ref if v_ref is not None else None)


def x_coordinates(state: ChainState, params: ControlParams) -> np.ndarray:
    """x_k = z_{k-1} - z_k - d for k = 1..N."""
    return state.z[:-1] - state.z[1:] - params.d


def leader_forcing(leader: LeaderSpec, params: ControlParams, t) -> np.ndarray:
    """x_0(t) = (z0'' + alpha z0') / omega**2 on an array of times."""
    t = np.asarray(t, dtype=float)
    out = np.empty_like(t)
    for i, ti in enumerate(t.flat):
        _, v, acc = leader_kinematics(leader, float(ti))
        out.flat[i] = (acc + params.alpha * v) / params.omega ** 2
    return out


def write_trajectory_csv(record: TrajectoryRecord, path) -> None:
    """Rows ``t,k,r,v,q`` for k = 1..N in (time, car) order, 17 significant digits."""
    n = record.n_cars
    with open(path, "w", newline="\n") as fh:
        fh.write("t,k,r,v,q\n")
        for i, t in enumerate(record.times):
            ts = f"{t:.17g}"
            for k in range(1, n + 1):
                q = "" if record.deviations is None else f"{record.deviations[i, k]:.17g}"
                fh.write(f"{ts},{k},{record.gaps[i, k - 1]:.17g},{record.velocities[i, k]:.17g},{q}\n")
