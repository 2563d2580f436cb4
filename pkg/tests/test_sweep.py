import math

import pytest

from chainlab.metrics import StabilityReport
from chainlab.model import ModelError, PerturbedLattice, SectorClass, SingleVelocityKick
from chainlab.sweep import (CSV_HEADER, INCONCLUSIVE, STABLE, UNSTABLE, Grid, Template, Thresholds,
                            agreement, cell_margin, classify_cell, run_sweep, sweep_csv)

FAST = dict(horizon=300.0, dt=0.02, stride=5, k_min=10, k_max=40)


def _report(i_hat):
    return StabilityReport(i_hat, 1.0, None, None, 1.0, 1)


def test_classify_cell_logic():
    assert classify_cell(_report(-0.1), -1.0) == UNSTABLE
    assert classify_cell(_report(0.5), -0.2, Thresholds(0.02, -0.02)) == STABLE
    assert classify_cell(_report(0.5), 0.001) == INCONCLUSIVE
    assert classify_cell(_report(0.5), 0.05) == UNSTABLE
    with pytest.raises(ModelError):
        Thresholds(-0.1, -0.2)


def test_stable_cell_perturbed_template():
    t = Template(ic=PerturbedLattice(42, 1.0, 0.1, 0.0), **FAST)
    (cell,) = run_sweep(Grid((3.0,), (1.0,)), t)
    assert cell.analytic_sector is SectorClass.STABLE
    assert cell.empirical_label == STABLE
    assert cell.margin == pytest.approx(0.2 / math.sqrt(1 - 4 / 9))


def test_unstable_cell_kick_template():
    t = Template(ic=SingleVelocityKick(42, 1.0, 1e-3), **FAST)
    (cell,) = run_sweep(Grid((1.0,), (1.0,)), t)
    assert cell.analytic_sector is SectorClass.UNSTABLE
    assert cell.empirical_label == UNSTABLE
    assert cell.growth_slope > 0.02
    assert math.isnan(cell.margin)


@pytest.mark.parametrize("alpha", [0.5, 1.6, 3.0])
def test_unperturbed_cell_is_stable(alpha):
    t = Template(ic=SingleVelocityKick(42, 1.0, 0.0), **FAST)
    (cell,) = run_sweep(Grid((alpha,), (1.0,)), t)
    assert cell.empirical_label == STABLE


def test_restricted_margin():
    from chainlab.model import ConstantVelocity, ControlParams
    m = cell_margin(ControlParams(1.8, 1.0, 1.0), PerturbedLattice(10, 1.0, 0.05, 0.05), ConstantVelocity(1.0))
    assert m == pytest.approx(2 * (0.05 + 0.05 / 2.8))


def test_small_grid_deterministic_across_workers():
    grid = Grid.linear(0.4, 3.0, 3, 0.5, 1.5, 3)
    t = Template(**FAST)
    a = sweep_csv(run_sweep(grid, t, workers=1))
    b = sweep_csv(run_sweep(grid, t, workers=2))
    assert a == b
    lines = a.splitlines()
    assert lines[0] == CSV_HEADER
    assert len(lines) == 10
    rows = [l.split(",") for l in lines[1:]]
    assert [(float(r[0]), float(r[1])) for r in rows] == grid.cells()
    assert {r[6] for r in rows} <= {STABLE, UNSTABLE, INCONCLUSIVE}


def test_failed_cell_is_inconclusive():
    # dt above the threshold for alpha = 20 -> the cell reports the reason instead of raising
    t = Template(**dict(FAST, dt=0.05))
    (cell,) = run_sweep(Grid((20.0,), (1.0,)), t)
    assert cell.empirical_label == INCONCLUSIVE and "threshold" in cell.reason


def test_agreement_counts():
    grid = Grid.linear(0.4, 3.0, 3, 0.5, 1.5, 3)
    stats = agreement(run_sweep(grid, Template(**FAST)))
    assert stats["unstable_labels_in_stable"] == 0
    with pytest.raises(ModelError):
        run_sweep(Grid((), ()))
