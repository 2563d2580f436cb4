"""Follow-the-leader car chains: integration, reference solutions, spectra and checks."""
from .integrator import TrajectoryRecord, simulate
from .metrics import StabilityReport, gap_extrema
from .model import (BoundedDeviation, ConstantVelocity, ControlParams, ModelError, SectorClass,
                    Sinusoid, sector_classify)

__all__ = [
    "BoundedDeviation", "ConstantVelocity", "ControlParams", "ModelError", "SectorClass",
    "Sinusoid", "StabilityReport", "TrajectoryRecord", "gap_extrema", "sector_classify", "simulate",
]
__version__ = "0.1.0"
