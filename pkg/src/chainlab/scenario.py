"""Flat ``key = value`` scenario files.

Blank lines and ``#`` comments are ignored.  Keys are listed in ``KEYS``;
anything else is rejected with the offending line number.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Optional

from .model import (BoundedDeviation, ConstantVelocity, ControlParams, EquilibriumLattice,
                    Explicit, GapPerturbed, InitialConditionSpec, LeaderSpec, ModelError,
                    PerturbedLattice, SingleVelocityKick, Sinusoid, SummableDecay,
                    equilibrium_spacing)


class ConfigError(ValueError):
    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


def _floats(text: str) -> tuple:
    return tuple(float(x) for x in text.replace(",", " ").split())


# key -> (parser, description)
KEYS: dict[str, tuple[Any, str]] = {
    "alpha": (float, "friction coefficient alpha (1/time)"),
    "omega": (float, "control stiffness root omega (1/time)"),
    "d": (float, "target headway d (length)"),
    "n_cars": (int, "number of followers N"),
    "leader.kind": (str, "constant | sinusoid | bounded"),
    "leader.v": (float, "leader cruise speed v"),
    "leader.amplitude": (float, "sinusoid amplitude A"),
    "leader.omega0": (float, "sinusoid frequency omega0"),
    "leader.delta": (float, "bounded: deviation as a fraction of the equilibrium spacing"),
    "leader.shape": (str, "bounded: bump_train | single_bump"),
    "leader.period": (float, "bounded: bump period"),
    "ic.kind": (str, "equilibrium | perturbed | gap_perturbed | summable | kick | explicit"),
    "ic.theta": (float, "position/gap perturbation fraction theta"),
    "ic.beta": (float, "velocity perturbation beta"),
    "ic.epsilon": (float, "velocity kick of car 1"),
    "ic.rho": (float, "summable: geometric decay ratio"),
    "ic.pattern": (str, "alternating | same_sign"),
    "ic.positions": (_floats, "explicit: positions z_0..z_N"),
    "ic.velocities": (_floats, "explicit: velocities v_0..v_N"),
    "horizon": (float, "simulated time span"),
    "dt": (float, "RK4 step (default 1e-3)"),
    "sample_stride": (int, "record every n-th step (default 1)"),
    "seed": (int, "seed for randomised checks"),
    "spectrum.box": (float, "half-width of the complex grid (default 2 omega)"),
    "spectrum.resolution": (float, "grid spacing (default 0.01)"),
    "saddle.mu": (float, "ray slope mu (default 2/alpha)"),
    "saddle.k_min": (int, "first k of the table (default 1)"),
    "saddle.k_max": (int, "last k of the table (default N - 1)"),
    "sweep.alpha_min": (float, "grid lower alpha (default 0.2)"),
    "sweep.alpha_max": (float, "grid upper alpha (default 4)"),
    "sweep.n_alpha": (int, "alpha points (default 20)"),
    "sweep.omega_min": (float, "grid lower omega (default 0.2)"),
    "sweep.omega_max": (float, "grid upper omega (default 2)"),
    "sweep.n_omega": (int, "omega points (default 20)"),
    "sweep.k_min": (int, "growth-fit first index (default 10)"),
    "sweep.k_max": (int, "growth-fit last index (default 60)"),
    "sweep.slope_pos": (float, "Unstable threshold (default 0.02)"),
    "sweep.slope_neg": (float, "Stable threshold (default -0.02)"),
    "density.l0dot": (float, "linear velocity ramp: car k starts at v - l0dot k (default 0)"),
}


def parse_text(text: str) -> dict:
    values: dict[str, Any] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", lineno)
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in KEYS:
            raise ConfigError(f"unknown key {key!r}", lineno)
        if key in values:
            raise ConfigError(f"duplicate key {key!r}", lineno)
        parser = KEYS[key][0]
        try:
            if parser is int:
                parsed = int(value)
            else:
                parsed = parser(value)
        except ValueError:
            raise ConfigError(f"cannot parse {key} = {value!r}", lineno) from None
        if isinstance(parsed, float) and not math.isfinite(parsed):
            raise ConfigError(f"{key} must be finite", lineno)
        values[key] = parsed
    return values


def load(path) -> dict:
    with open(path) as fh:
        return parse_text(fh.read())


def require(values: dict, *keys: str):
    missing = [k for k in keys if k not in values]
    if missing:
        raise ConfigError("missing required key(s): " + ", ".join(missing))


@dataclass(frozen=True)
class Scenario:
    params: ControlParams
    leader: LeaderSpec
    ic: InitialConditionSpec
    horizon: float
    dt: float
    stride: int
    seed: int
    extra: dict = field(default_factory=dict)

    @property
    def v_ref(self) -> Optional[float]:
        return getattr(self.ic, "v", None)


def build_params(values: dict) -> ControlParams:
    require(values, "alpha", "omega")
    return ControlParams(values["alpha"], values["omega"], values.get("d", 1.0))


def build_leader(values: dict, params: ControlParams) -> LeaderSpec:
    require(values, "leader.kind", "leader.v")
    kind, v = values["leader.kind"], values["leader.v"]
    if kind == "constant":
        return ConstantVelocity(v)
    if kind == "sinusoid":
        require(values, "leader.amplitude", "leader.omega0")
        return Sinusoid(v, values["leader.amplitude"], values["leader.omega0"])
    if kind == "bounded":
        require(values, "leader.delta")
        if v < 0:
            raise ModelError("bounded leader needs v >= 0")
        return BoundedDeviation(v, values["leader.delta"], equilibrium_spacing(params, v),
                                values.get("leader.shape", "bump_train"),
                                values.get("leader.period", 10.0))
    raise ConfigError(f"unknown leader.kind {kind!r}")


def build_ic(values: dict, leader: LeaderSpec) -> InitialConditionSpec:
    require(values, "ic.kind")
    kind = values["ic.kind"]
    if kind == "explicit":
        require(values, "ic.positions", "ic.velocities")
        return Explicit(values["ic.positions"], values["ic.velocities"])
    require(values, "n_cars")
    n, v = values["n_cars"], leader.v
    theta, beta = values.get("ic.theta", 0.0), values.get("ic.beta", 0.0)
    pattern = values.get("ic.pattern", "alternating")
    if kind == "equilibrium":
        return EquilibriumLattice(n, v)
    if kind == "perturbed":
        return PerturbedLattice(n, v, theta, beta, pattern)
    if kind == "gap_perturbed":
        return GapPerturbed(n, theta, beta, pattern)
    if kind == "summable":
        return SummableDecay(n, v, theta, beta, values.get("ic.rho", 0.5))
    if kind == "kick":
        require(values, "ic.epsilon")
        return SingleVelocityKick(n, v, values["ic.epsilon"])
    raise ConfigError(f"unknown ic.kind {kind!r}")


DEFAULT_SEED = 20240607


def build_scenario(values: dict, need_horizon: bool = True) -> Scenario:
    params = build_params(values)
    leader = build_leader(values, params)
    ic = build_ic(values, leader)
    if need_horizon:
        require(values, "horizon")
    extra = {k: v for k, v in values.items() if "." in k and k.split(".")[0] in
             ("spectrum", "saddle", "sweep", "density")}
    return Scenario(params, leader, ic, values.get("horizon", 0.0), values.get("dt", 1e-3),
                    values.get("sample_stride", 1), values.get("seed", DEFAULT_SEED), extra)


def describe_keys() -> str:
    width = max(len(k) for k in KEYS)
    return "\n".join(f"  {k.ljust(width)}  {desc}" for k, (_, desc) in KEYS.items())
