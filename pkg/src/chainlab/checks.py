"""Named verification suites behind ``chainlab verify``.

Each suite runs fixed scenarios and returns ``Check`` rows comparing a
measured quantity against a bound.  Scenario constants are part of the
suite definition; only the randomised oracle suite takes a seed.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.integrate import solve_ivp

from . import oracle, spectral
from .integrator import leader_forcing, simulate
from .metrics import (gap_extrema, mean_length_series, ray_growth_fit, ray_phase_fit,
                      ray_samples, velocity_deviation)
from .model import (BoundedDeviation, ConstantVelocity, ControlParams, EquilibriumLattice,
                    Explicit, GapPerturbed, PerturbedLattice, SingleVelocityKick, Sinusoid,
                    SummableDecay, bounded_deviation, d_star, equilibrium_spacing)
from .scenario import DEFAULT_SEED
from .sweep import Grid, agreement, run_sweep, sweep_csv

SLACK = 1e-6


@dataclass(frozen=True)
class Check:
    name: str
    measured: float
    bound: float
    relation: str  # "<=", ">=", "<", ">", "=="
    passed: bool

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"{tag}  {self.name}: measured {self.measured:.10g} {self.relation} {self.bound:.10g}"


def _cmp(name, measured, relation, bound) -> Check:
    ops = {"<=": lambda a, b: a <= b, ">=": lambda a, b: a >= b,
           "<": lambda a, b: a < b, ">": lambda a, b: a > b, "==": lambda a, b: a == b}
    ok = bool(ops[relation](measured, bound)) and not (isinstance(measured, float) and math.isnan(measured))
    return Check(name, float(measured), float(bound), relation, ok)


def _gap_bounds(prefix, rec, lower, upper) -> list[Check]:
    rep = gap_extrema(rec)
    return [_cmp(f"{prefix} min gap", rep.I_hat, ">=", lower - SLACK),
            _cmp(f"{prefix} max gap", rep.S_hat, "<=", upper + SLACK)]


# ---------------------------------------------------------------------------

def suite_oracle(seed: int = DEFAULT_SEED, n_scenarios: int = 20) -> list[Check]:
    """Integrator gaps against chained variation-of-constants solutions (alpha > 2 omega)."""
    rng = np.random.default_rng(seed)
    start = time.perf_counter()
    worst = 0.0
    for _ in range(n_scenarios):
        n = int(rng.integers(1, 6))
        omega = rng.uniform(0.5, 1.5)
        params = ControlParams(2.0 * omega * rng.uniform(1.1, 2.5), omega, rng.uniform(0.5, 2.0))
        v = rng.uniform(0.5, 2.0)
        kind = rng.integers(0, 3)
        if kind == 0:
            leader = ConstantVelocity(v)
        elif kind == 1:
            leader = Sinusoid(v, rng.uniform(0.0, 0.3), rng.uniform(0.2, 1.5))
        else:
            leader = bounded_deviation(params, v, rng.uniform(0.0, 0.2), "bump_train", rng.uniform(5.0, 15.0))
        ic = PerturbedLattice(n, v, rng.uniform(0.0, 0.2), rng.uniform(0.0, 0.2),
                              ("alternating", "same_sign")[int(rng.integers(0, 2))])
        rec = simulate(ic, params, leader, 20.0, 1e-3, 1)
        x_int = rec.gaps - params.d
        grid = rec.times
        x_lead = leader_forcing(leader, params, grid)
        xdot0 = rec.velocities[0, :-1] - rec.velocities[0, 1:]
        x_orc = oracle.chain_solution(x_lead, x_int[0], xdot0, params, grid).T
        scale = max(np.max(np.abs(x_orc)), np.finfo(float).tiny)
        worst = max(worst, float(np.max(np.abs(x_int - x_orc)) / scale))
    elapsed = time.perf_counter() - start
    return [_cmp(f"oracle max relative discrepancy over {n_scenarios} scenarios (seed {seed})", worst, "<=", 1e-5),
            _cmp("oracle runtime [s]", elapsed, "<", 30.0)]


def suite_theorem1() -> list[Check]:
    start = time.perf_counter()
    params, v = ControlParams(4.0, 1.0, 1.0), 1.0
    m = spectral.margin_theorem1(0.1, 0.0, 0.0, params, v)
    rec = simulate(PerturbedLattice(100, v, 0.1, 0.0), params, ConstantVelocity(v), 200.0, 1e-3, 100)
    checks = [_cmp("theorem1 epsilon", abs(m.value - 0.2 / math.sqrt(0.75)), "<=", 1e-12),
              _cmp("theorem1 hypothesis epsilon < 1", m.value, "<", 1.0)]
    checks += _gap_bounds("theorem1 (1 -+ eps) a", rec, m.lower, m.upper)
    checks.append(_cmp("theorem1 runtime [s]", time.perf_counter() - start, "<", 60.0))
    # leader wandering within delta a of v t
    leader = bounded_deviation(params, v, 0.2, "bump_train", 8.0)
    m2 = spectral.margin_theorem1(0.05, 0.05, 0.2, params, v)
    rec2 = simulate(PerturbedLattice(100, v, 0.05, 0.05), params, leader, 200.0, 1e-3, 100)
    checks += _gap_bounds("theorem1 bump leader delta=0.2", rec2, m2.lower, m2.upper)
    return checks


def suite_theorem2() -> list[Check]:
    params, v = ControlParams(3.0, 1.0, 1.0), 1.0
    leader = Sinusoid(v, 0.1, 1.0)
    rec = simulate(EquilibriumLattice(100, v), params, leader, 200.0, 1e-3, 10)
    bound = max(abs(leader.v_max - v), 0.1)
    checks = [_cmp("theorem2 part 1 sup|v_k - v|", velocity_deviation(rec, v), "<=", bound + SLACK)]
    zeta = spectral.margin_theorem2_zeta(0.1, 0.1, params, v)
    rec2 = simulate(PerturbedLattice(20, v, 0.1, 0.1), params, ConstantVelocity(v), 200.0, 1e-3, 100)
    checks += _gap_bounds("theorem2 part 2 (1 -+ zeta) a", rec2, zeta.lower, zeta.upper)
    q = np.abs(rec2.deviations[:, 1:])
    checks.append(_cmp("theorem2 part 2 max|q_k(200)| / max|q_k(0)|", q[-1].max() / q[0].max(), "<=", 1e-6))
    return checks


def suite_theorem3() -> list[Check]:
    params = ControlParams(3.0, 1.0, 1.0)
    # amplitude chosen so that d* = (A + 3 (0.05 + A)) / 1 = 0.3
    leader = Sinusoid(0.05, 0.0375, 1.0)
    ds = d_star(params, leader)
    checks = [_cmp("corollary d*", abs(ds - 0.3), "<=", 1e-12)]
    rec = simulate(GapPerturbed(100, 0.0, 0.0), params, leader, 200.0, 1e-3, 100)
    checks += _gap_bounds("corollary d -+ d*", rec, 1.0 - ds, 1.0 + ds)
    m = spectral.margin_theorem3(0.1, 0.05, params, leader)
    rec2 = simulate(GapPerturbed(100, 0.1, 0.05), params, leader, 200.0, 1e-3, 100)
    checks.append(_cmp("theorem3 eta < 1", m.value, "<", 1.0))
    checks += _gap_bounds("theorem3 (1 -+ eta) d", rec2, m.lower, m.upper)
    # alpha = 2 omega boundary with theta = beta = 0
    pb = ControlParams(2.0, 1.0, 1.0)
    lb = Sinusoid(0.05, 0.2 / 3.0, 1.0)
    mb = spectral.margin_theorem3(0.0, 0.0, pb, lb)
    rec3 = simulate(GapPerturbed(100, 0.0, 0.0), pb, lb, 200.0, 1e-3, 100)
    checks += _gap_bounds("alpha = 2 omega boundary d -+ d*", rec3, mb.lower, mb.upper)
    return checks


def suite_theorem4() -> list[Check]:
    params, v = ControlParams(1.8, 1.0, 1.0), 1.0
    m = spectral.margin_theorem4(0.05, 0.05, 0.0, params, v)
    rec = simulate(SummableDecay(100, v, 0.05, 0.05), params, ConstantVelocity(v), 200.0, 1e-3, 100)
    checks = [_cmp("theorem4 eta", m.value, "<", 0.25)]
    checks += _gap_bounds("theorem4 (1 -+ 2 eta) a", rec, m.lower, m.upper)
    # bump leader with finite deviation integral
    leader = bounded_deviation(params, v, 0.02, "single_bump", 4.0)
    sigma = spectral.theorem4_sigma(leader, params)
    m2 = spectral.margin_theorem4(0.02, 0.02, sigma, params, v)
    rec2 = simulate(SummableDecay(100, v, 0.02, 0.02), params, leader, 200.0, 1e-3, 100)
    checks.append(_cmp("theorem4 single-bump safety sum < 1/4", m2.value / 2.0, "<", 0.25))
    checks += _gap_bounds("theorem4 single bump (1 -+ 2 eta) a", rec2, m2.lower, m2.upper)
    return checks


def summable_gap_state(n: int, params: ControlParams, theta: float, beta: float, rho: float = 0.5) -> Explicit:
    """Stationary leader at 0; sum |r_k - d| = theta d and sum |v_{k-1} - v_k| = beta in the limit."""
    k = np.arange(1, n + 1)
    w = (1.0 - rho) * rho ** (k - 1.0) * np.where(k % 2 == 1, 1.0, -1.0)
    gaps = params.d * (1.0 + theta * w)
    z = np.concatenate(([0.0], -np.cumsum(gaps)))
    vel = np.concatenate(([0.0], -np.cumsum(beta * w)))
    return Explicit(tuple(z), tuple(vel))


def suite_theorem5() -> list[Check]:
    params = ControlParams(1.8, 1.0, 1.0)
    m = spectral.margin_theorem5(0.1, 0.05, 0.0, params)
    rec = simulate(summable_gap_state(100, params, 0.1, 0.05), params, ConstantVelocity(0.0), 200.0, 1e-3, 100)
    checks = [_cmp("theorem5 safety sum < 1/2", m.value / 2.0, "<", 0.5)]
    checks += _gap_bounds("theorem5 (1 -+ eta) d", rec, m.lower, m.upper)
    return checks


def _ramp_state(n: int, a: float, v: float, ramp: float) -> Explicit:
    k = np.arange(n + 1)
    return Explicit(tuple(-k * a), tuple(v - ramp * k))


def suite_density() -> list[Check]:
    params, v, ramp, t_end = ControlParams(2.0, 1.0, 1.0), 1.0, 1e-3, 10.0
    a = equilibrium_spacing(params, v)
    law = oracle.mean_length_law(a, ramp, params.alpha, t_end)
    errs = {}
    for n in (100, 400):
        rec = simulate(_ramp_state(n, a, v, ramp), params, ConstantVelocity(v), t_end, 1e-3, 100)
        errs[n] = abs(mean_length_series(rec)[-1] - law)
    checks = [_cmp("density |L_N - L| ratio N=100 -> 400", errs[100] / errs[400], ">=", 3.0)]
    for n in (100, 400):
        rec = simulate(PerturbedLattice(n, v, 0.05, 0.05), params, ConstantVelocity(v), t_end, 1e-3, 10)
        series = mean_length_series(rec)
        checks.append(_cmp(f"density L'(0)=0 max|L_N(t) - L_N(0)| N={n}",
                           np.max(np.abs(series - series[0])), "<=", 5.0 * a / n))
    return checks


def suite_resonance() -> list[Check]:
    params = ControlParams.undamped(1.0, 1.0)
    leader = Sinusoid(1.0, 1.0, 1.0)
    rec = simulate(EquilibriumLattice(10, 1.0), params, leader, 300.0, 1e-3, 100)
    checks = [_cmp("resonance omega = omega0 min gap", gap_extrema(rec).I_hat, "<", 0.0)]
    # the closed form against an independent ODE solve of x'' + omega^2 x = sin(omega0 t)
    w, w0 = 2.0, 1.0
    ts = np.linspace(0.0, 50.0, 5001)
    sol = solve_ivp(lambda t, y: [y[1], math.sin(w0 * t) - w * w * y[0]], (0.0, 50.0), [0.0, 0.0],
                    t_eval=ts, rtol=1e-11, atol=1e-12, method="DOP853")
    err = np.max(np.abs(oracle.resonance_x1(ts, w, w0) - sol.y[0]))
    checks.append(_cmp("resonance_x1 vs direct integration (omega=2, omega0=1)", err, "<=", 1e-4))
    # omega != omega0: the first gap stays bounded, the second resonates
    p2 = ControlParams.undamped(w, 1.0)
    leader2 = Sinusoid(1.0, 0.1, w0)
    rec2 = simulate(EquilibriumLattice(4, 1.0), p2, leader2, 300.0, 1e-3, 10)
    x1 = rec2.gaps[:, 0] - p2.d
    checks.append(_cmp("first gap vs exact x_1", np.max(np.abs(x1 - oracle.resonance_gap1(rec2.times, w, w0, 0.1))),
                       "<=", 1e-6))
    checks.append(_cmp("second gap min (omega=2, omega0=1)", float(rec2.gap_min[1]), "<", 0.0))
    return checks


def suite_spectrum() -> list[Check]:
    checks = []
    for ratio in (0.5, 1.0, 1.3):
        params = ControlParams(ratio, 1.0, 1.0)
        wit = spectral.spectrum_positive_real_witness(params, 1.0, 1e-3)
        found = wit is not None and wit.real > 0 and spectral.in_spectrum(wit, params)
        checks.append(_cmp(f"spectrum witness Re z > 0 at alpha/omega={ratio}", float(found), "==", 1.0))
        if wit is not None:
            checks.append(_cmp(f"quartic h(a, b) <= 0 at witness alpha/omega={ratio}",
                               spectral.quartic_h(wit.real, wit.imag, params), "<=", 1e-12))
    for ratio in (1.42, 1.6, 2.5):
        wit = spectral.spectrum_positive_real_witness(ControlParams(ratio, 1.0, 1.0), 1.0, 1e-3)
        checks.append(_cmp(f"spectrum has no Re z > 0 point at alpha/omega={ratio}", float(wit is None), "==", 1.0))
    checks.append(_cmp("h(0) - (1 - ln 2)", abs(spectral.h_function(0.0) - (1.0 - math.log(2.0))), "<=", 1e-12))
    checks.append(_cmp("|h(1/sqrt 2)|", abs(spectral.h_function(1.0 / math.sqrt(2.0))), "<=", 1e-12))
    return checks


def saddle_run(alpha=1.0, omega=1.0, mu=2.0, epsilon=1e-3, n=300, k_max=200, dt=1e-3):
    params, v = ControlParams(alpha, omega, 1.0), 1.0
    rec = simulate(SingleVelocityKick(n, v, epsilon), params, ConstantVelocity(v),
                   mu * k_max, dt, 100)
    return params, rec


def suite_saddle() -> list[Check]:
    start = time.perf_counter()
    mu, eps = 2.0, 1e-3
    params, rec = saddle_run(mu=mu, epsilon=eps)
    data = spectral.saddle_analysis(mu, params, eps)
    fit = ray_growth_fit(rec, mu, (50, 200))
    W, phase = ray_phase_fit(rec, mu, (50, 200), slope=data.f)
    ks = np.arange(50, 201)
    q = ray_samples(rec, mu, ks)
    ref = spectral.leading_term(ks, data)
    amp = float(np.dot(q, ref) / np.dot(ref, ref))
    return [
        _cmp("saddle slope relative error vs f(mu)", abs(fit.slope / data.f - 1.0), "<=", 0.05),
        _cmp("saddle phase increment |W - Omega|", abs(W - data.Omega), "<=", 0.05),
        _cmp("saddle leading-term amplitude ratio |A - 1|", abs(amp - 1.0), "<=", 0.05),
        _cmp("saddle runtime [s]", time.perf_counter() - start, "<", 300.0),
    ]


def suite_sweep(workers=(1, 2)) -> list[Check]:
    grid = Grid.linear()
    outputs = []
    cells = None
    for w in workers:
        cells = run_sweep(grid, workers=w)
        outputs.append(sweep_csv(cells))
    stats = agreement(cells)
    return [
        _cmp("sweep Unstable labels in analytic Stable sector", stats["unstable_labels_in_stable"], "==", 0),
        _cmp("sweep Unstable fraction for alpha < 1.3 omega", stats["inner_unstable_fraction"], ">=", 0.9),
        _cmp(f"sweep CSV identical for workers {workers}", float(len(set(outputs)) == 1), "==", 1.0),
    ]


def suite_corollary2() -> list[Check]:
    params, v = ControlParams(1.0, 1.0, 1.0), 1.0
    rec = simulate(SingleVelocityKick(300, v, 0.01), params, ConstantVelocity(v), 600.0, 1e-3, 10)
    mins = [float(rec.truncate(h).gaps.min()) for h in (150.0, 300.0, 600.0)]
    return [
        _cmp("corollary2 running min 150 -> 300 decreases", mins[1] - mins[0], "<", 0.0),
        _cmp("corollary2 running min 300 -> 600 decreases", mins[2] - mins[1], "<", 0.0),
        _cmp("corollary2 min gap by t=600", mins[2], "<", 0.0),
    ]


SUITES: dict[str, Callable[..., list[Check]]] = {
    "theorem1": suite_theorem1,
    "theorem2": suite_theorem2,
    "theorem3": suite_theorem3,
    "theorem4": suite_theorem4,
    "theorem5": suite_theorem5,
    "density": suite_density,
    "resonance": suite_resonance,
    "spectrum": suite_spectrum,
    "saddle": suite_saddle,
    "oracle": suite_oracle,
    "sweep": suite_sweep,
    "corollary2": suite_corollary2,
}


def run_suite(name: str, seed: int = DEFAULT_SEED) -> list[Check]:
    if name not in SUITES:
        raise KeyError(name)
    if name == "oracle":
        return suite_oracle(seed)
    return SUITES[name]()
