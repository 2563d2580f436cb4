"""Protocol parameters, leader trajectories and initial configurations.

Cars are indexed 0..N with car 0 the leader.  Every follower obeys

    z_k'' = omega**2 * (z_{k-1} - z_k - d) - alpha * z_k'

so a run is fully described by a ``ControlParams`` triple, a leader
description and an initial-condition family.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np


class ModelError(ValueError):
    """Raised for parameter combinations outside an operation's domain."""


@dataclass(frozen=True)
class ControlParams:
    alpha: float
    omega: float
    d: float

    def __post_init__(self):
        for name in ("alpha", "omega", "d"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ModelError(f"{name} must be a positive finite number, got {value!r}")

    @classmethod
    def undamped(cls, omega: float, d: float) -> "ControlParams":
        """alpha = 0, the dissipation-free resonance setting; bypasses the alpha > 0 check."""
        probe = cls(1.0, omega, d)
        obj = object.__new__(cls)
        object.__setattr__(obj, "alpha", 0.0)
        object.__setattr__(obj, "omega", probe.omega)
        object.__setattr__(obj, "d", probe.d)
        return obj


# ---------------------------------------------------------------------------
# Leaders
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConstantVelocity:
    v: float

    @property
    def v_max(self) -> float:
        return abs(self.v)

    @property
    def a_max(self) -> float:
        return 0.0


@dataclass(frozen=True)
class Sinusoid:
    """z0(t) = v t + amplitude * sin(omega0 t)."""

    v: float
    amplitude: float
    omega0: float

    @property
    def v_max(self) -> float:
        return abs(self.v) + abs(self.amplitude * self.omega0)

    @property
    def a_max(self) -> float:
        return abs(self.amplitude) * self.omega0 ** 2


# sup|b'| and sup|b''| of b(s) = sin(s)**4 per unit of pi/period.
_BUMP_D1 = 3.0 * math.sqrt(3.0) / 4.0
_BUMP_D2 = 4.0
BUMP_SHAPES = ("bump_train", "single_bump")


@dataclass(frozen=True)
class BoundedDeviation:
    """z0(t) = v t + delta_frac * scale * sin(pi t / period)**4.

    ``bump_train`` repeats the bump forever; ``single_bump`` keeps it on
    [0, period] only.  The profile is C2, its deviation from v t never
    exceeds ``delta_frac * scale`` and that bound is attained.  ``scale`` is
    the length the fraction refers to, normally the equilibrium spacing.
    """

    v: float
    delta_frac: float
    scale: float
    shape: str = "bump_train"
    period: float = 10.0

    def __post_init__(self):
        if self.shape not in BUMP_SHAPES:
            raise ModelError(f"unknown bounded-deviation shape {self.shape!r}; expected one of {BUMP_SHAPES}")
        if not self.period > 0:
            raise ModelError("bump period must be positive")
        if self.delta_frac < 0 or self.scale < 0:
            raise ModelError("delta_frac and scale must be non-negative")

    @property
    def height(self) -> float:
        return self.delta_frac * self.scale

    @property
    def v_max(self) -> float:
        return abs(self.v) + self.height * _BUMP_D1 * math.pi / self.period

    @property
    def a_max(self) -> float:
        return self.height * _BUMP_D2 * (math.pi / self.period) ** 2

    @property
    def deviation_integral(self) -> float:
        """Integral of |z0(t) - v t| over t >= 0 (infinite for a train)."""
        if self.shape == "bump_train" and self.height > 0:
            return math.inf
        return self.height * 3.0 * self.period / 8.0


LeaderSpec = Union[ConstantVelocity, Sinusoid, BoundedDeviation]


def bounded_deviation(params: ControlParams, v: float, delta_frac: float,
                      shape: str = "bump_train", period: float = 10.0) -> BoundedDeviation:
    """Bump leader whose deviation is measured in equilibrium spacings."""
    return BoundedDeviation(v, delta_frac, equilibrium_spacing(params, v), shape, period)


def leader_kinematics(leader: LeaderSpec, t: float) -> tuple[float, float, float]:
    """Position, velocity and acceleration of the leader at time t."""
    if isinstance(leader, ConstantVelocity):
        return leader.v * t, leader.v, 0.0
    if isinstance(leader, Sinusoid):
        A, w = leader.amplitude, leader.omega0
        return (leader.v * t + A * math.sin(w * t),
                leader.v + A * w * math.cos(w * t),
                -A * w * w * math.sin(w * t))
    if isinstance(leader, BoundedDeviation):
        h, p = leader.height, leader.period
        if leader.shape == "single_bump" and t > p:
            return leader.v * t, leader.v, 0.0
        k = math.pi / p
        s, c = math.sin(k * t), math.cos(k * t)
        return (leader.v * t + h * s ** 4,
                leader.v + h * 4.0 * k * s ** 3 * c,
                h * k * k * (12.0 * s * s * c * c - 4.0 * s ** 4))
    raise TypeError(f"not a leader spec: {leader!r}")


def reference_velocity(leader: LeaderSpec) -> float:
    return leader.v


# ---------------------------------------------------------------------------
# Scalar laws
# ---------------------------------------------------------------------------

def equilibrium_spacing(params: ControlParams, v: float) -> float:
    """Gap at which force and friction balance at cruise speed v."""
    if v < 0:
        raise ModelError("cruise speed must be non-negative")
    return params.d + params.alpha / params.omega ** 2 * v


def d_star(params: ControlParams, leader: LeaderSpec) -> float:
    """Worst-case gap distortion induced by leader manoeuvres."""
    v_max, a_max = leader.v_max, leader.a_max
    if not (math.isfinite(v_max) and math.isfinite(a_max)):
        raise ModelError("leader bounds must be finite")
    return (a_max + params.alpha * v_max) / params.omega ** 2


class SectorClass(enum.Enum):
    STABLE = "stable"
    RESTRICTED = "restricted"
    UNSTABLE = "unstable"

    def __str__(self):
        return self.value


def sector_classify(params: ControlParams) -> SectorClass:
    a, w = params.alpha, params.omega
    if a > 2.0 * w:
        return SectorClass.STABLE
    if a >= math.sqrt(2.0) * w:
        return SectorClass.RESTRICTED
    return SectorClass.UNSTABLE


def headway_eta(theta: float, beta: float, params: ControlParams, leader: LeaderSpec) -> float:
    """max(d*/d, (theta + 2 beta/(alpha d)) / sqrt(1 - (2 omega/alpha)^2)).

    ``beta`` is an absolute speed bound on neighbouring velocity
    differences.  At alpha == 2 omega the second term is taken as 0 when
    theta == beta == 0 and as infinity otherwise.
    """
    alpha, omega, d = params.alpha, params.omega, params.d
    ratio = d_star(params, leader) / d
    num = theta + 2.0 * beta / (alpha * d)
    disc = 1.0 - (2.0 * omega / alpha) ** 2
    if disc <= 0:
        if num == 0 and disc == 0:
            return ratio
        return math.inf
    return max(ratio, num / math.sqrt(disc))


def synthesize_stabilizing_params(A: float, B: float, C: float, leader: LeaderSpec,
                                  alpha0: float = 1.0, max_doublings: int = 200) -> ControlParams:
    """Choose (alpha, omega, d) giving a collision-free bounded chain.

    A, B are the smallest and largest initial gaps and C the largest
    neighbouring velocity difference.  alpha is doubled until the omega
    window sqrt((a_max + alpha v_max)/d) < omega < alpha/2 is nonempty and
    some omega in it yields eta < 1; the window midpoint is tried first.
    """
    if not (0 < A <= B < math.inf) or C < 0:
        raise ModelError("need 0 < A <= B < inf and C >= 0")
    v_max, a_max = leader.v_max, leader.a_max
    if not (math.isfinite(v_max) and math.isfinite(a_max)):
        raise ModelError("leader bounds must be finite")
    d = 0.5 * (A + B)
    theta = (B - A) / (A + B)
    alpha = alpha0
    for _ in range(max_doublings):
        lo = math.sqrt((a_max + alpha * v_max) / d)
        hi = 0.5 * alpha
        if lo < hi:
            # midpoint first, then a sweep toward the lower edge where the
            # initial-data term is smallest
            for frac in (0.5, 0.25, 0.1, 0.05, 0.02, 0.01):
                omega = lo + frac * (hi - lo)
                if omega <= 0:
                    continue
                params = ControlParams(alpha, omega, d)
                if headway_eta(theta, C, params, leader) < 1.0:
                    return params
        alpha *= 2.0
    raise ModelError("no stabilising parameters found within the doubling budget")


# ---------------------------------------------------------------------------
# Initial conditions
# ---------------------------------------------------------------------------

def _alternating(n: int) -> np.ndarray:
    return np.where(np.arange(1, n + 1) % 2 == 1, 1.0, -1.0)


@dataclass(frozen=True)
class EquilibriumLattice:
    n_cars: int
    v: float


PATTERNS = ("alternating", "same_sign")


@dataclass(frozen=True)
class PerturbedLattice:
    """|z_k(0) + k a| <= theta a and |z_k'(0) - v| <= beta v, saturated."""

    n_cars: int
    v: float
    theta: float
    beta: float
    pattern: str = "alternating"


@dataclass(frozen=True)
class GapPerturbed:
    """(1 +- theta) d gaps and neighbouring velocity differences of +-beta."""

    n_cars: int
    theta: float
    beta: float
    pattern: str = "alternating"


@dataclass(frozen=True)
class SummableDecay:
    """Geometric deviations theta a (1-rho) rho^(k-1), beta v (1-rho) rho^(k-1)."""

    n_cars: int
    v: float
    theta: float
    beta: float
    rho: float = 0.5


@dataclass(frozen=True)
class SingleVelocityKick:
    n_cars: int
    v: float
    epsilon: float


@dataclass(frozen=True)
class Explicit:
    positions: tuple
    velocities: tuple

    @property
    def n_cars(self) -> int:
        return len(self.positions) - 1


InitialConditionSpec = Union[EquilibriumLattice, PerturbedLattice, GapPerturbed,
                             SummableDecay, SingleVelocityKick, Explicit]


@dataclass(frozen=True)
class ChainState:
    """Positions and velocities of cars 0..N at time t (index 0 is the leader)."""

    t: float
    z: np.ndarray = field(repr=False)
    v: np.ndarray = field(repr=False)

    def __post_init__(self):
        z = np.array(self.z, dtype=float)
        v = np.array(self.v, dtype=float)
        if z.ndim != 1 or z.shape != v.shape or z.size < 2:
            raise ModelError("positions and velocities must be equal-length sequences of length >= 2")
        z.flags.writeable = False
        v.flags.writeable = False
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "v", v)

    @property
    def n_cars(self) -> int:
        return self.z.size - 1

    @property
    def gaps(self) -> np.ndarray:
        return self.z[:-1] - self.z[1:]


def _pattern_signs(pattern: str, n: int) -> np.ndarray:
    if pattern == "alternating":
        return _alternating(n)
    if pattern == "same_sign":
        return np.ones(n)
    raise ModelError(f"unknown perturbation pattern {pattern!r}; expected one of {PATTERNS}")


def _check_n(n: int):
    if int(n) != n or n < 1:
        raise ModelError(f"n_cars must be an integer >= 1, got {n!r}")


def build_initial_state(spec: InitialConditionSpec, params: ControlParams,
                        leader: LeaderSpec) -> ChainState:
    """Materialise an initial-condition family at t = 0.

    The leader's own position and velocity come from ``leader``.  Raises
    ``ModelError`` if the generated positions are not strictly decreasing.
    """
    z0, v0, _ = leader_kinematics(leader, 0.0)
    if isinstance(spec, Explicit):
        state = ChainState(0.0, spec.positions, spec.velocities)
        z, v = state.z, state.v
    else:
        n = spec.n_cars
        _check_n(n)
        k = np.arange(1, n + 1, dtype=float)
        if isinstance(spec, EquilibriumLattice):
            a = equilibrium_spacing(params, spec.v)
            zk, vk = z0 - k * a, np.full(n, spec.v)
        elif isinstance(spec, PerturbedLattice):
            if spec.theta < 0 or spec.beta < 0:
                raise ModelError("theta and beta must be non-negative")
            a = equilibrium_spacing(params, spec.v)
            s = _pattern_signs(spec.pattern, n)
            zk = z0 - k * a + s * spec.theta * a
            vk = spec.v + s * spec.beta * spec.v
        elif isinstance(spec, GapPerturbed):
            if not 0 <= spec.theta < 1 or spec.beta < 0:
                raise ModelError("need 0 <= theta < 1 and beta >= 0")
            s = _pattern_signs(spec.pattern, n)
            gaps = params.d * (1.0 + s * spec.theta)
            zk = z0 - np.cumsum(gaps)
            vk = v0 - np.cumsum(s * spec.beta)
        elif isinstance(spec, SummableDecay):
            if spec.theta < 0 or spec.beta < 0 or not 0 < spec.rho < 1:
                raise ModelError("need theta, beta >= 0 and 0 < rho < 1")
            a = equilibrium_spacing(params, spec.v)
            w = (1.0 - spec.rho) * spec.rho ** (k - 1.0) * _alternating(n)
            zk = z0 - k * a + spec.theta * a * w
            vk = spec.v + spec.beta * spec.v * w
        elif isinstance(spec, SingleVelocityKick):
            a = equilibrium_spacing(params, spec.v)
            zk, vk = z0 - k * a, np.full(n, spec.v)
            vk[0] += spec.epsilon
        else:
            raise TypeError(f"not an initial-condition spec: {spec!r}")
        z = np.concatenate(([z0], zk))
        v = np.concatenate(([v0], vk))
    gaps = z[:-1] - z[1:]
    if np.any(gaps <= 0):
        k_bad = int(np.argmax(gaps <= 0)) + 1
        raise ModelError(f"initial positions violate strict ordering at car {k_bad} (gap {gaps[k_bad - 1]:.6g})")
    return ChainState(0.0, z, v)
