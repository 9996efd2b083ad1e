"""Concrete dynamical systems, feedback laws and parameter validation."""

from .growth import GrowthModel, YieldModel
from .chemostat import (
    ChemostatParams,
    DelayFunctional,
    InfeasibleSetpointError,
    default_params,
    validate_params,
    equilibrium,
    check_hypothesis_h,
    max_feedback_a,
    feedback_dilution,
    chemostat_rhs,
    make_chemostat_rhs,
    transform_forward,
    transform_inverse,
    transformed_aux,
    feedback_transformed,
    transformed_rhs,
    make_transformed_rhs,
    closed_loop_y_rate,
    derived_constants,
)
from . import ex31, ex32

__all__ = [
    "GrowthModel",
    "YieldModel",
    "ChemostatParams",
    "DelayFunctional",
    "InfeasibleSetpointError",
    "default_params",
    "validate_params",
    "equilibrium",
    "check_hypothesis_h",
    "max_feedback_a",
    "feedback_dilution",
    "chemostat_rhs",
    "make_chemostat_rhs",
    "transform_forward",
    "transform_inverse",
    "transformed_aux",
    "feedback_transformed",
    "transformed_rhs",
    "make_transformed_rhs",
    "closed_loop_y_rate",
    "derived_constants",
    "ex31",
    "ex32",
]
