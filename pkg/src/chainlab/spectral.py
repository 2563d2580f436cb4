"""Spectrum of the infinite chain operator, stability margins and the
saddle-point growth law along rays t = mu k.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .model import (BoundedDeviation, ConstantVelocity, ControlParams, LeaderSpec, ModelError,
                    equilibrium_spacing, headway_eta)

SQRT2 = math.sqrt(2.0)


# ---------------------------------------------------------------------------
# Spectrum
# ---------------------------------------------------------------------------

def char_poly(z, params: ControlParams):
    return z * z + params.alpha * z + params.omega ** 2


def in_spectrum(z, params: ControlParams):
    """|z**2 + alpha z + omega**2| <= omega**2 (vectorised over z)."""
    inside = np.abs(char_poly(np.asarray(z, dtype=complex), params)) <= params.omega ** 2
    return bool(inside) if inside.ndim == 0 else inside


def quartic_h(a, b, params: ControlParams):
    """h(a, b) = b^4 + A b^2 + B; z = a + ib is in the spectrum iff h <= 0."""
    alpha, w2 = params.alpha, params.omega ** 2
    p = a * a + alpha * a + w2
    q = 2 * a + alpha
    # |G|^2 - w2^2 = (p - b^2)^2 + q^2 b^2 - w2^2
    A = q * q - 2 * p
    B = p * p - w2 * w2
    return b ** 4 + A * b ** 2 + B


def spectrum_grid(params: ControlParams, box: float, resolution: float,
                  re_min: Optional[float] = None):
    """Real and imaginary grid axes and the membership mask (rows = imaginary)."""
    if not resolution > 0 or not box > 0:
        raise ModelError("box and resolution must be positive")
    lo = -box if re_min is None else re_min
    n_re = int(math.floor((box - lo) / resolution + 1e-9)) + 1
    re = lo + resolution * np.arange(n_re)
    n_im = int(math.floor(2 * box / resolution + 1e-9)) + 1
    im = -box + resolution * np.arange(n_im)
    z = re[None, :] + 1j * im[:, None]
    return re, im, in_spectrum(z, params)


def spectrum_positive_real_witness(params: ControlParams, box: Optional[float] = None,
                                   resolution: float = 1e-3) -> Optional[complex]:
    """Some grid point z with Re z > 0 inside the spectrum, or None.

    Scans Re in (0, box], Im in [-box, box]; ``box`` defaults to omega.
    """
    if box is None:
        box = params.omega
    if not resolution > 0:
        raise ModelError("resolution must be positive")
    n_re = int(math.floor(box / resolution + 1e-9))
    re = resolution * np.arange(1, n_re + 1)
    n_im = int(math.floor(2 * box / resolution + 1e-9)) + 1
    im = -box + resolution * np.arange(n_im)
    # column-by-column keeps memory bounded for fine grids
    for a in re:
        hit = in_spectrum(a + 1j * im, params)
        if hit.any():
            return complex(a, im[int(np.argmax(hit))])
    return None


# ---------------------------------------------------------------------------
# Stability margins
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Margin:
    """A theorem's margin value, whether its hypothesis holds and the gap bounds it implies."""

    value: float
    holds: bool
    lower: float
    upper: float

    def __float__(self):
        return float(self.value)


def _damping_root(params: ControlParams) -> float:
    return math.sqrt(1.0 - (2.0 * params.omega / params.alpha) ** 2)


def margin_theorem1(theta: float, beta: float, delta: float, params: ControlParams, v: float) -> Margin:
    """epsilon for lattice deviations theta a, beta v and a leader within delta a of v t."""
    if not params.alpha > 2.0 * params.omega:
        raise ModelError("margin requires alpha > 2 omega")
    if not 0 <= delta < 0.5:
        raise ModelError("need 0 <= delta < 1/2")
    if theta < 0 or beta < 0:
        raise ModelError("theta and beta must be non-negative")
    a = equilibrium_spacing(params, v)
    eps = 2.0 * max(delta, (theta + 2.0 * v * beta / (params.alpha * a)) / _damping_root(params))
    return Margin(eps, eps < 1.0, (1.0 - eps) * a, (1.0 + eps) * a)


def margin_theorem2_zeta(theta: float, beta: float, params: ControlParams, v: float) -> Margin:
    """zeta: the delta = 0 form of ``margin_theorem1``."""
    return margin_theorem1(theta, beta, 0.0, params, v)


def margin_theorem3(theta: float, beta_abs: float, params: ControlParams, leader: LeaderSpec) -> Margin:
    """eta for gaps within (1 +- theta) d and neighbour speed gaps <= beta_abs.

    alpha == 2 omega is accepted only when theta == beta_abs == 0.
    """
    a, w = params.alpha, params.omega
    boundary_ok = a == 2.0 * w and theta == 0 and beta_abs == 0
    if not (a > 2.0 * w or boundary_ok):
        raise ModelError("margin requires alpha > 2 omega (or alpha = 2 omega with theta = beta = 0)")
    if not 0 <= theta < 1 or beta_abs < 0:
        raise ModelError("need 0 <= theta < 1 and beta >= 0")
    eta = headway_eta(theta, beta_abs, params, leader)
    d = params.d
    return Margin(eta, eta < 1.0, (1.0 - eta) * d, (1.0 + eta) * d)


def _check_restricted(params: ControlParams):
    a, w = params.alpha, params.omega
    if not SQRT2 * w <= a <= 2.0 * w:
        raise ModelError("margin requires sqrt(2) omega <= alpha <= 2 omega")


def theorem4_sigma(leader: LeaderSpec, params: ControlParams) -> float:
    """omega * int |z0 - v t| dt / a for leaders with a closed-form integral."""
    if isinstance(leader, ConstantVelocity):
        return 0.0
    if isinstance(leader, BoundedDeviation):
        a = equilibrium_spacing(params, abs(leader.v))
        return params.omega * leader.deviation_integral / a
    return math.inf


def margin_theorem4(theta: float, beta: float, sigma: float, params: ControlParams, v: float) -> Margin:
    """eta = 2 (theta + beta v/(a omega) + sigma); bounds (1 -+ 2 eta) a."""
    _check_restricted(params)
    a = equilibrium_spacing(params, v)
    s = theta + beta * v / (a * params.omega) + sigma
    eta = 2.0 * s
    return Margin(eta, s < 0.25, (1.0 - 2.0 * eta) * a, (1.0 + 2.0 * eta) * a)


def margin_theorem5(theta: float, beta_abs: float, sigma: float, params: ControlParams) -> Margin:
    """eta = 2 (theta + beta/(omega d) + sigma); bounds (1 -+ eta) d."""
    _check_restricted(params)
    d = params.d
    s = theta + beta_abs / (params.omega * d) + sigma
    eta = 2.0 * s
    return Margin(eta, s < 0.5, (1.0 - eta) * d, (1.0 + eta) * d)


# ---------------------------------------------------------------------------
# Saddle-point asymptotics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SaddleData:
    """Saddle quantities for the ray t = mu k.

    ``f``, ``Omega``, ``phi0`` and ``c`` are the growth exponent, phase
    increment, phase offset and amplitude of the asymptotic law
    q_{k+1}(mu k) ~ c / sqrt(k) e^{k f} sin(Omega k + phi0).
    ``amplitude_factor`` and ``phase_shift`` carry the residue of 1/G at
    the saddle: the leading term of the exact inverse transform is
    c * amplitude_factor / sqrt(k) e^{k f} sin(Omega k + phase_shift).
    """

    mu: float
    tau: float
    nu: float
    z_plus: complex
    z_minus: complex
    f: float
    phi0: float
    Omega: float
    c: float
    spp_plus: complex
    amplitude_factor: float
    phase_shift: float


def saddle_exponent(z, mu: float, params: ControlParams):
    """S(z) = mu z - ln(z^2 + alpha z + omega^2) + ln omega^2 (principal log)."""
    z = np.asarray(z, dtype=complex)
    return mu * z - np.log(char_poly(z, params)) + math.log(params.omega ** 2)


def saddle_analysis(mu: float, params: ControlParams, epsilon: float) -> SaddleData:
    a, w = params.alpha, params.omega
    if not a < 2.0 * w:
        raise ModelError("saddle analysis requires alpha < 2 omega")
    tau = math.sqrt(w * w - a * a / 4.0)
    if not mu * tau > 1.0:
        raise ModelError(f"need mu * tau > 1 (complex saddles); got mu tau = {mu * tau:.6g}")
    nu = math.sqrt(mu * mu * tau * tau - 1.0)
    zp = complex(-a / 2.0 + 1.0 / mu, nu / mu)
    zm = zp.conjugate()
    f = -a * mu / 2.0 + 1.0 - math.log(2.0 * tau / (mu * w * w))
    phi0 = math.atan(nu)
    Omega = nu - phi0
    c = epsilon * math.sqrt(2.0 * tau / (math.pi * nu * mu))
    spp = nu * complex(nu, 1.0) / tau ** 2
    return SaddleData(mu, tau, nu, zp, zm, f, phi0, Omega, c, spp,
                      mu / (2.0 * tau), math.pi / 4.0 - phi0 / 2.0)


def asymptotic_envelope(k, data: SaddleData):
    """(c / sqrt(k)) e^{k f} sin(Omega k + phi0), the predicted q_{k+1}(mu k)."""
    k = np.asarray(k, dtype=float)
    if np.any(k < 1):
        raise ModelError("k must be >= 1")
    out = data.c / np.sqrt(k) * np.exp(k * data.f) * np.sin(data.Omega * k + data.phi0)
    return float(out) if out.ndim == 0 else out


def leading_term(k, data: SaddleData):
    """Leading saddle term including the 1/G(z+) residue (amplitude and phase)."""
    k = np.asarray(k, dtype=float)
    if np.any(k < 1):
        raise ModelError("k must be >= 1")
    out = (data.c * data.amplitude_factor / np.sqrt(k) * np.exp(k * data.f)
           * np.sin(data.Omega * k + data.phase_shift))
    return float(out) if out.ndim == 0 else out


def h_function(x: float) -> float:
    """h(x) = 1 - ln 2 - x / sqrt(1 - x^2) - ln(1 - x^2), the exponent at mu = 1/tau."""
    if not 0 <= x < 1:
        raise ModelError("h is defined on [0, 1)")
    return 1.0 - math.log(2.0) - x / math.sqrt(1.0 - x * x) - math.log1p(-x * x)


def fastest_ray(params: ControlParams) -> float:
    """mu = 2 / alpha, where f(mu) peaks; a complex saddle exists iff alpha < sqrt(2) omega."""
    return 2.0 / params.alpha


def peak_growth(params: ControlParams) -> float:
    """max over mu of f(mu) = -ln(alpha tau / omega^2) in the unstable sector."""
    a, w = params.alpha, params.omega
    if not a < SQRT2 * w:
        raise ModelError("peak growth is defined for alpha < sqrt(2) omega")
    tau = math.sqrt(w * w - a * a / 4.0)
    return -math.log(a * tau / (w * w))
