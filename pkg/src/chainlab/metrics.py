"""Observables extracted from trajectory records."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.ndimage import maximum_filter1d
from scipy.optimize import least_squares

from .integrator import TrajectoryRecord
from .model import ModelError, leader_kinematics

ENVELOPE_WINDOW = 5
NOISE_FLOOR = 1e-9


@dataclass(frozen=True)
class StabilityReport:
    """Finite-window gap extrema.  ``I_hat``/``S_hat`` cover every integrator step up to ``horizon``."""

    I_hat: float
    S_hat: float
    first_collision: Optional[tuple[float, int]]
    velocity_deviation: Optional[float]
    horizon: float
    n_cars: int

    def to_json(self) -> str:
        def num(x):
            if x is None:
                return None
            return float(f"{x:.17g}")
        payload = asdict(self)
        payload["I_hat"] = num(self.I_hat)
        payload["S_hat"] = num(self.S_hat)
        payload["velocity_deviation"] = num(self.velocity_deviation)
        payload["horizon"] = num(self.horizon)
        if self.first_collision is not None:
            payload["first_collision"] = {"time": num(self.first_collision[0]),
                                          "car": int(self.first_collision[1])}
        return json.dumps(payload, indent=2, sort_keys=True)


def gap_extrema(record: TrajectoryRecord, v: Optional[float] = None) -> StabilityReport:
    """Smallest and largest gap seen over the run (cars 1..N)."""
    if record.times.size == 0:
        raise ModelError("empty record")
    if v is None:
        v = record.v_ref
    dev = velocity_deviation(record, v) if v is not None else None
    return StabilityReport(float(record.gap_min.min()), float(record.gap_max.max()),
                           record.first_negative, dev, record.horizon, record.n_cars)


def mean_length(record: TrajectoryRecord, t: float) -> float:
    """L_N(t) = (z_0 - z_N) / N at the sample nearest to t."""
    times = record.times
    if not times[0] - 1e-12 <= t <= times[-1] + 1e-12:
        raise ModelError("t outside the recorded range")
    i = int(np.argmin(np.abs(times - t)))
    return float(record.gaps[i].sum() / record.n_cars)


def mean_length_series(record: TrajectoryRecord) -> np.ndarray:
    return record.gaps.sum(axis=1) / record.n_cars


def velocity_deviation(record: TrajectoryRecord, v: float) -> float:
    """sup over cars k >= 1 and samples of |v_k(t) - v|."""
    return float(np.max(np.abs(record.velocities[:, 1:] - v)))


def ray_samples(record: TrajectoryRecord, mu: float, ks) -> np.ndarray:
    """q_{k+1}(mu k) for each k, cubic-interpolated in time between samples."""
    if record.deviations is None:
        raise ModelError("record carries no deviations; configure a reference velocity")
    ks = np.asarray(ks, dtype=int)
    times = record.times
    if ks.max() + 1 > record.n_cars:
        raise ModelError("ray leaves the chain: need k + 1 <= N")
    if mu * ks.max() > times[-1] + 1e-9:
        raise ModelError("ray leaves the horizon: need mu k <= horizon")
    out = np.empty(ks.size)
    step = times[1] - times[0] if times.size > 1 else 1.0
    for j, k in enumerate(ks):
        t = mu * k
        i = int(round(t / step))
        if abs(i * step - t) <= 1e-9 * max(1.0, t):
            out[j] = record.deviations[i, k + 1]
            continue
        lo = max(0, i - 4)
        hi = min(times.size, i + 5)
        out[j] = float(CubicSpline(times[lo:hi], record.deviations[lo:hi, k + 1])(t))
    return out


def sliding_envelope(values, window: int = ENVELOPE_WINDOW) -> np.ndarray:
    """Centered running max of |values| over ``window`` consecutive entries."""
    return maximum_filter1d(np.abs(np.asarray(values, dtype=float)), size=window, mode="nearest")


@dataclass(frozen=True)
class RayFit:
    slope: float
    intercept: float
    residual: float

    def __iter__(self):
        return iter((self.slope, self.intercept, self.residual))


def ray_growth_fit(record: TrajectoryRecord, mu: float, k_range, method: str = "envelope") -> RayFit:
    """Growth rate per car index of q_{k+1}(mu k) along the ray t = mu k.

    ``envelope``: least-squares slope of ln(envelope(|q|) sqrt(k)) against k.
    ``oscillatory``: fits sqrt(k) q = e^{s k} (A sin W k + B cos W k) and
    returns s; use it when the oscillation period in k is longer than the
    envelope window can resolve.

    ``k_range`` is an inclusive (k_min, k_max) pair or an explicit sequence.
    A run whose deviations never leave the noise floor is stationary and
    gets slope -inf.
    """
    if method not in ("envelope", "oscillatory"):
        raise ModelError(f"unknown growth-fit method {method!r}")
    ks = _ks(k_range)
    q = ray_samples(record, mu, ks)
    env = sliding_envelope(q)
    if record.deviations is not None and env.max() <= NOISE_FLOOR * max(1.0, record.a_ref or 1.0):
        return RayFit(-math.inf, -math.inf, 0.0)
    y = np.log(np.maximum(env, np.finfo(float).tiny) * np.sqrt(ks))
    A = np.column_stack([ks, np.ones_like(ks, dtype=float)])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = float(np.sqrt(np.mean((A @ coef - y) ** 2)))
    if method == "envelope":
        return RayFit(float(coef[0]), float(coef[1]), resid)
    return _oscillatory_fit(ks, q, float(coef[0]))


def _oscillatory_fit(ks: np.ndarray, q: np.ndarray, slope0: float) -> RayFit:
    y = q * np.sqrt(ks)
    scale = float(np.max(np.abs(y)))
    y = y / scale
    x = (ks - ks[0]).astype(float)

    def residual(p):
        s, w, a, b = p
        return np.exp(s * x) * (a * np.sin(w * ks) + b * np.cos(w * ks)) - y

    # coarse scan over (s, W) with the amplitudes from 2x2 normal equations,
    # then a joint refinement of all four parameters
    ss = slope0 + np.linspace(-0.25, 0.25, 26)
    ws = np.linspace(0.0, math.pi, 91)
    decay = np.exp(ss[:, None, None] * x)
    S = decay * np.sin(ws[None, :, None] * ks)
    C = decay * np.cos(ws[None, :, None] * ks)
    ss_, sc, cc = (S * S).sum(-1), (S * C).sum(-1), (C * C).sum(-1)
    sy, cy = (S * y).sum(-1), (C * y).sum(-1)
    tiny = np.finfo(float).tiny
    det = ss_ * cc - sc * sc
    ok = det > 1e-12 * np.maximum(ss_ * cc, tiny)
    safe = np.where(ok, det, 1.0)
    # W = 0 leaves only the cosine column
    a = np.where(ok, (cc * sy - sc * cy) / safe, 0.0)
    b = np.where(ok, (ss_ * cy - sc * sy) / safe, cy / np.maximum(cc, tiny))
    r = ((a[..., None] * S + b[..., None] * C - y) ** 2).sum(-1)
    i, j = np.unravel_index(int(np.argmin(r)), r.shape)
    fit = least_squares(residual, [ss[i], ws[j], a[i, j], b[i, j]], method="lm")
    s, w, a, b = fit.x
    amp = math.hypot(a, b) * scale
    intercept = math.log(amp) - s * ks[0] if amp > 0 else -math.inf
    return RayFit(float(s), intercept, float(np.sqrt(np.mean(fit.fun ** 2))))


def _ks(k_range) -> np.ndarray:
    if isinstance(k_range, tuple) and len(k_range) == 2:
        ks = np.arange(int(k_range[0]), int(k_range[1]) + 1)
    else:
        ks = np.asarray(list(k_range), dtype=int)
    if ks.size < 10:
        raise ModelError("growth fit needs at least 10 points")
    if ks.min() < 1:
        raise ModelError("k must be >= 1")
    return ks


def ray_phase_fit(record: TrajectoryRecord, mu: float, k_range, slope: Optional[float] = None,
                  n_freq: int = 20000) -> tuple[float, float]:
    """Phase increment and offset of q_{k+1}(mu k) along the ray.

    The samples are detrended by sqrt(k) e^{-slope k} (``slope`` defaults to
    the envelope fit) and a sinusoid A sin(W k + p) is fitted by scanning W
    over (0, pi) with a linear least-squares amplitude at each W.
    """
    ks = _ks(k_range)
    if slope is None:
        slope = ray_growth_fit(record, mu, ks).slope
    y = ray_samples(record, mu, ks) * np.sqrt(ks) * np.exp(-slope * (ks - ks[0]))
    y = y / np.max(np.abs(y))
    best = (math.inf, 0.0, 0.0)
    for W in np.linspace(0.0, math.pi, n_freq + 1)[1:-1]:
        M = np.column_stack([np.sin(W * ks), np.cos(W * ks)])
        coef, *_ = np.linalg.lstsq(M, y, rcond=None)
        r = float(np.sum((M @ coef - y) ** 2))
        if r < best[0]:
            best = (r, W, math.atan2(coef[1], coef[0]))
    return best[1], best[2]


def leader_deviation_sup(record: TrajectoryRecord, v: float) -> float:
    """sup_t |z0'(t) - v| over the recorded samples."""
    return float(max(abs(leader_kinematics(record.leader, float(t))[1] - v) for t in record.times))
