"""(alpha, omega) grid sweep producing an empirical phase diagram.

Every cell runs the same scenario template with its own (alpha, omega),
fits the deviation growth along the ray t = mu k and labels the cell.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from . import spectral
from .integrator import simulate
from .metrics import StabilityReport, gap_extrema, ray_growth_fit
from .model import (ConstantVelocity, ControlParams, InitialConditionSpec, LeaderSpec,
                    ModelError, PerturbedLattice, SectorClass, SingleVelocityKick,
                    SummableDecay, sector_classify)

STABLE, UNSTABLE, INCONCLUSIVE = "Stable", "Unstable", "Inconclusive"


@dataclass(frozen=True)
class Thresholds:
    slope_pos: float = 0.02
    slope_neg: float = -0.02

    def __post_init__(self):
        if not (self.slope_pos > 0 and self.slope_neg < 0):
            raise ModelError("need slope_pos > 0 > slope_neg")


@dataclass(frozen=True)
class Template:
    """Scenario shared by every cell.  ``ic`` must carry n_cars >= k_max + 1."""

    d: float = 1.0
    leader: LeaderSpec = ConstantVelocity(1.0)
    ic: InitialConditionSpec = SingleVelocityKick(62, 1.0, 1e-3)
    horizon: float = 600.0
    dt: float = 0.01
    stride: int = 10
    k_min: int = 10
    k_max: int = 60
    fit_method: str = "oscillatory"


@dataclass(frozen=True)
class Grid:
    alphas: tuple
    omegas: tuple

    @classmethod
    def linear(cls, alpha_min=0.2, alpha_max=4.0, n_alpha=20, omega_min=0.2, omega_max=2.0, n_omega=20):
        return cls(tuple(float(x) for x in np.linspace(alpha_min, alpha_max, n_alpha)),
                   tuple(float(x) for x in np.linspace(omega_min, omega_max, n_omega)))

    def cells(self):
        """Row-major: alpha is the slow index."""
        return [(a, w) for a in self.alphas for w in self.omegas]


@dataclass(frozen=True)
class SweepCell:
    alpha: float
    omega: float
    analytic_sector: SectorClass
    I_hat: float
    S_hat: float
    growth_slope: float
    empirical_label: str
    margin: float
    mu: float = math.nan
    reason: str = ""


def classify_cell(report: StabilityReport, slope: float, thresholds: Thresholds = Thresholds()) -> str:
    if report.I_hat < 0 or slope > thresholds.slope_pos:
        return UNSTABLE
    if slope < thresholds.slope_neg and report.I_hat > 0:
        return STABLE
    return INCONCLUSIVE


def cell_ray(params: ControlParams, horizon: float, k_max: int) -> float:
    """Ray slope for the growth fit: the fastest-growing ray 2/alpha, capped so mu k_max <= horizon."""
    return min(spectral.fastest_ray(params), horizon / k_max)


def cell_margin(params: ControlParams, ic: InitialConditionSpec, leader: LeaderSpec) -> float:
    """The sector's stability margin for the template, NaN where none applies."""
    sector = sector_classify(params)
    v = getattr(ic, "v", None)
    if v is None or sector is SectorClass.UNSTABLE:
        return math.nan
    if isinstance(ic, SingleVelocityKick):
        theta, beta = 0.0, (abs(ic.epsilon) / v if v > 0 else math.inf)
    elif isinstance(ic, (PerturbedLattice, SummableDecay)):
        theta, beta = ic.theta, ic.beta
    else:
        theta, beta = 0.0, 0.0
    try:
        if sector is SectorClass.STABLE:
            return spectral.margin_theorem2_zeta(theta, beta, params, v).value
        sigma = spectral.theorem4_sigma(leader, params)
        return spectral.margin_theorem4(theta, beta, sigma, params, v).value
    except ModelError:
        return math.nan


def run_cell(args) -> SweepCell:
    alpha, omega, template, thresholds = args
    sector = math.nan
    try:
        params = ControlParams(alpha, omega, template.d)
        sector = sector_classify(params)
        margin = cell_margin(params, template.ic, template.leader)
        rec = simulate(template.ic, params, template.leader, template.horizon,
                       template.dt, template.stride)
        report = gap_extrema(rec)
        mu = cell_ray(params, template.horizon, template.k_max)
        fit = ray_growth_fit(rec, mu, (template.k_min, template.k_max), method=template.fit_method)
        label = classify_cell(report, fit.slope, thresholds)
        return SweepCell(alpha, omega, sector, report.I_hat, report.S_hat, fit.slope,
                         label, margin, mu)
    except (ModelError, FloatingPointError, ValueError) as exc:
        return SweepCell(alpha, omega, sector, math.nan, math.nan, math.nan,
                         INCONCLUSIVE, math.nan, reason=str(exc))


def run_sweep(grid: Grid, template: Template = Template(), thresholds: Thresholds = Thresholds(),
              workers: int = 1) -> list[SweepCell]:
    """One cell per grid point in row-major order, whatever the worker count."""
    cells = grid.cells()
    if not cells:
        raise ModelError("empty grid")
    jobs = [(a, w, template, thresholds) for a, w in cells]
    if workers <= 1:
        return [run_cell(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run_cell, jobs, chunksize=max(1, len(jobs) // (4 * workers))))


CSV_HEADER = "alpha,omega,sector,i_hat,s_hat,slope,label,margin"


def _g(x: float) -> str:
    return f"{x:.17g}"


def sweep_csv(cells: Sequence[SweepCell]) -> str:
    lines = [CSV_HEADER]
    for c in cells:
        lines.append(",".join([_g(c.alpha), _g(c.omega), str(c.analytic_sector), _g(c.I_hat),
                               _g(c.S_hat), _g(c.growth_slope), c.empirical_label, _g(c.margin)]))
    return "\n".join(lines) + "\n"


def agreement(cells: Sequence[SweepCell], inner_ratio: float = 1.3) -> dict:
    """Counts behind the sector/label cross-check."""
    stable = [c for c in cells if c.analytic_sector is SectorClass.STABLE]
    inner = [c for c in cells if c.alpha < inner_ratio * c.omega]
    unstable_cells = [c for c in cells if c.analytic_sector is SectorClass.UNSTABLE]
    frac = lambda xs: (sum(c.empirical_label == UNSTABLE for c in xs) / len(xs)) if xs else math.nan
    return {
        "stable_cells": len(stable),
        "unstable_labels_in_stable": sum(c.empirical_label == UNSTABLE for c in stable),
        "inner_unstable_cells": len(inner),
        "inner_unstable_fraction": frac(inner),
        "unstable_sector_fraction": frac(unstable_cells),
    }
