"""Numerical integration: fixed-step RK4, method of steps for delayed
systems, event-driven sampled-data stepping, and the fused kernels."""

from .history import HistoryBuffer
from .signals import DisturbanceSignal, make_schedule
from .trajectory import Trajectory, write_csv, read_csv, CsvFormatError
from .integrators import (
    DivergenceError,
    ConstraintExitError,
    integrate_ode,
    integrate_dde,
    integrate_sampled,
)
from .runner import (
    run_chemostat,
    run_chemostat_transformed,
    run_ex31_comparison,
    run_ex31_concrete,
    run_ex32,
)
from . import kernels

__all__ = [
    "HistoryBuffer",
    "DisturbanceSignal",
    "make_schedule",
    "Trajectory",
    "write_csv",
    "read_csv",
    "CsvFormatError",
    "DivergenceError",
    "ConstraintExitError",
    "integrate_ode",
    "integrate_dde",
    "integrate_sampled",
    "run_chemostat",
    "run_chemostat_transformed",
    "run_ex31_comparison",
    "run_ex31_concrete",
    "run_ex32",
    "kernels",
]
