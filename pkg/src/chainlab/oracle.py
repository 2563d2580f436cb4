"""Analytic and semi-analytic references for the chain.

Nothing here calls the integrator.  ``vc_solve_next`` solves the scalar
equation

    x_k'' + alpha x_k' + omega**2 x_k = omega**2 x_{k-1}(t)

by variation of constants, so chaining it from the leader forcing x_0
gives an independent route to the gaps r_k = d + x_k.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numba
import numpy as np

from .model import ControlParams, ModelError


@dataclass(frozen=True)
class KernelParams:
    """Roots of lambda**2 + alpha lambda + omega**2."""

    lambda_plus: complex
    lambda_minus: complex
    gamma: float | None
    tau: float | None

    @classmethod
    def from_params(cls, params: ControlParams) -> "KernelParams":
        a, w = params.alpha, params.omega
        disc = a * a / 4.0 - w * w
        if disc > 0:
            g = math.sqrt(disc)
            return cls(complex(-a / 2 + g), complex(-a / 2 - g), g, None)
        if disc < 0:
            tau = math.sqrt(-disc)
            return cls(complex(-a / 2, tau), complex(-a / 2, -tau), None, tau)
        return cls(complex(-a / 2), complex(-a / 2), 0.0, 0.0)

    @property
    def confluent(self) -> bool:
        return self.lambda_plus == self.lambda_minus


class ResonanceError(ArithmeticError):
    """The drive frequency equals the proper frequency of the first car."""


def _uniform_step(grid: np.ndarray) -> float:
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 3:
        raise ModelError("grid needs at least three points")
    steps = np.diff(grid)
    h = (grid[-1] - grid[0]) / (grid.size - 1)
    if not h > 0 or np.max(np.abs(steps - h)) > 1e-9 * max(1.0, abs(grid[-1])):
        raise ModelError("grid must be uniform and increasing")
    if grid[0] != 0.0:
        raise ModelError("grid must start at t = 0")
    return h


def exp_convolution(lam: complex, x: np.ndarray, h: float, weight: np.ndarray | None = None) -> np.ndarray:
    """I(t_i) = int_0^{t_i} exp(lam (t_i - s)) w(s) x(s) ds on a uniform grid.

    Composite Simpson along the two interleaved chains of even and odd
    nodes.  The odd chain starts from the three-point rule
    h/12 (5 f0 + 8 f1 - f2) on the first interval.  The recursion only
    multiplies by exp(lam h) with Re(lam) <= 0, so it never overflows.
    """
    x = np.asarray(x, dtype=float)
    if weight is not None:
        x = x * weight
    return _simpson_chain(complex(lam), np.ascontiguousarray(x), float(h))


@numba.njit(cache=True)
def _simpson_chain(lam, x, h):
    n = x.size
    out = np.zeros(n, dtype=np.complex128)
    e1 = cmath.exp(lam * h)
    e2 = e1 * e1
    if n > 2:
        out[1] = h / 12.0 * (5.0 * e1 * x[0] + 8.0 * x[1] - x[2] / e1)
    c = h / 3.0
    for i in range(2, n):
        out[i] = e2 * out[i - 2] + c * (e2 * x[i - 2] + 4.0 * e1 * x[i - 1] + x[i])
    return out


def impulse_response(params: ControlParams, t) -> np.ndarray:
    """K(t) with K'' + alpha K' + omega**2 K = delta, K(0) = 0, K'(0) = 1."""
    t = np.asarray(t, dtype=float)
    kp = KernelParams.from_params(params)
    if kp.confluent:
        return t * np.exp(-params.alpha * t / 2.0)
    if kp.tau is not None:
        return np.exp(-params.alpha * t / 2.0) * np.sin(kp.tau * t) / kp.tau
    lp, lm = kp.lambda_plus.real, kp.lambda_minus.real
    return (np.exp(lp * t) - np.exp(lm * t)) / (lp - lm)


def homogeneous(params: ControlParams, x0: float, xdot0: float, t) -> np.ndarray:
    """Free response of lambda**2 + alpha lambda + omega**2 from (x0, xdot0)."""
    t = np.asarray(t, dtype=float)
    kp = KernelParams.from_params(params)
    a = params.alpha
    if kp.confluent:
        lam = -a / 2.0
        return (x0 + (xdot0 - lam * x0) * t) * np.exp(lam * t)
    if kp.tau is not None:
        tau = kp.tau
        return np.exp(-a * t / 2.0) * (x0 * np.cos(tau * t) + (xdot0 + a * x0 / 2.0) / tau * np.sin(tau * t))
    lp, lm = kp.lambda_plus.real, kp.lambda_minus.real
    cp = (xdot0 - lm * x0) / (lp - lm)
    cm = (lp * x0 - xdot0) / (lp - lm)
    return cp * np.exp(lp * t) + cm * np.exp(lm * t)


def vc_solve_next(x_prev, x0: float, xdot0: float, params: ControlParams, grid) -> np.ndarray:
    """x_k on ``grid`` from x_{k-1} sampled on the same grid and x_k(0), x_k'(0)."""
    grid = np.asarray(grid, dtype=float)
    h = _uniform_step(grid)
    x_prev = np.asarray(x_prev, dtype=float)
    if x_prev.shape != grid.shape:
        raise ModelError("x_prev must be sampled on the grid")
    kp = KernelParams.from_params(params)
    w2 = params.omega ** 2
    if kp.confluent:
        lam = kp.lambda_plus
        j0 = exp_convolution(lam, x_prev, h).real
        j1 = exp_convolution(lam, x_prev, h, weight=grid).real
        conv = grid * j0 - j1
    elif kp.tau is not None:
        conv = exp_convolution(kp.lambda_plus, x_prev, h).imag / kp.tau
    else:
        lp, lm = kp.lambda_plus, kp.lambda_minus
        conv = (exp_convolution(lp, x_prev, h).real - exp_convolution(lm, x_prev, h).real) / (lp.real - lm.real)
    return homogeneous(params, x0, xdot0, grid) + w2 * conv


def chain_solution(x_lead, x_init, xdot_init, params: ControlParams, grid) -> np.ndarray:
    """Rows x_1..x_N obtained by chaining ``vc_solve_next`` from x_0."""
    rows = []
    prev = np.asarray(x_lead, dtype=float)
    for a0, b0 in zip(x_init, xdot_init):
        prev = vc_solve_next(prev, float(a0), float(b0), params, grid)
        rows.append(prev)
    return np.array(rows)


def resonance_x1(t, omega: float, omega0: float):
    """Response of x'' + omega**2 x = sin(omega0 t) from rest."""
    if omega <= 0 or omega0 <= 0:
        raise ModelError("frequencies must be positive")
    if omega == omega0:
        raise ResonanceError("first particle resonance: omega == omega0")
    t = np.asarray(t, dtype=float)
    return (np.sin(omega0 * t) - omega0 / omega * np.sin(omega * t)) / (omega ** 2 - omega0 ** 2)


def resonance_forcing(t, omega0: float, amplitude: float = 1.0):
    """-z0''(t) / omega0**2 for z0 = v t + amplitude sin(omega0 t).

    This is the drive for which ``resonance_x1`` is the solution (with unit
    amplitude).
    """
    t = np.asarray(t, dtype=float)
    return amplitude * np.sin(omega0 * t)


def resonance_gap1(t, omega: float, omega0: float, amplitude: float = 1.0):
    """Exact x_1 = r_1 - d for alpha = 0, lattice start and a sinusoidal leader.

    The first gap sees the drive -amplitude omega0**2 sin(omega0 t) and starts
    with x_1(0) = 0, x_1'(0) = amplitude omega0 because the leader starts
    faster than the lattice speed.
    """
    t = np.asarray(t, dtype=float)
    forced = -amplitude * omega0 ** 2 * resonance_x1(t, omega, omega0)
    return forced + amplitude * omega0 * np.sin(omega * t) / omega


def lemma_bound(Q: float, A: float, C: float, params: ControlParams) -> float:
    """Uniform bound max(Q, (alpha A + 2 C) / (2 gamma)) on |x_k(t)| for alpha > 2 omega."""
    a, w = params.alpha, params.omega
    if not a > 2.0 * w:
        raise ModelError("lemma bound requires alpha > 2 omega")
    gamma = math.sqrt(a * a / 4.0 - w * w)
    return max(Q, (a * A + 2.0 * C) / (2.0 * gamma))


def f_t_max_bound(a: float, b: float, c: float, lambda_plus: float, lambda_minus: float) -> float:
    """max(c, a + b + c), an upper bound on sup_{t>=0} f(t) for f = a e^{l+ t} + b e^{l- t} + c.

    Wherever f > c the derivative is negative, so f never climbs above its
    start or its limit.  It bounds |f| as well when a >= 0; for negative a
    f(0) may be far below -c and only the one-sided bound survives.
    """
    if not lambda_minus < lambda_plus < 0:
        raise ModelError("need lambda_minus < lambda_plus < 0")
    return max(c, a + b + c)


def mean_length_law(L0: float, L0dot: float, alpha: float, t):
    """Infinite-chain mean length L(t) = L0 + (1 - e^{-alpha t}) L0dot / alpha."""
    if not alpha > 0:
        raise ModelError("alpha must be positive")
    t = np.asarray(t, dtype=float)
    out = L0 + (-np.expm1(-alpha * t)) / alpha * L0dot
    return float(out) if out.ndim == 0 else out


def stationary_current(params: ControlParams, v: float) -> float:
    """Cars per unit time past a fixed point in stationary flow, v / a."""
    if v < 0:
        raise ModelError("cruise speed must be non-negative")
    w2 = params.omega ** 2
    return w2 * v / (w2 * params.d + params.alpha * v)
