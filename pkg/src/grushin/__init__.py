"""Numerics for the heat equation of the Grushin operator
D_G = (Delta_x + |x|^2 Delta_y)/2: explicit heat kernel, semigroup,
Lorentz/Marcinkiewicz norms, Picard mild-solution solver, Monte Carlo
oracle and a verification harness.
"""

from .core import (
    Axis,
    Grid,
    GridFunction,
    ModelParams,
    Point,
    ScalingMap,
    apply_scaling,
    dilate,
    make_gaussian_datum,
    make_gauge_datum,
    make_indicator_datum,
    make_singular_datum,
    rotate,
    square_grid,
)
from .kernel import KernelQuadrature, kernel_eval, kernel_row, log_mehler_factor

__version__ = "0.1.0"
