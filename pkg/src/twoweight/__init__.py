"""Discrete two-weight inequalities for fractional singular integrals.

Cell-atomic measures on a uniform grid, truncated Calderon-Zygmund kernels,
Muckenhoupt and testing constants, restricted weak type optimizers and a
small experiment harness.
"""
from .exceptions import (ConfigError, ConvergenceError, DegenerateMeasureError,
                         MisalignedGridError, SingularEvaluationError)
from .geometry import Cube, CubeFamily, cell_partition, dilate, enumerate_cubes
from .measures import (AInfinityReport, DoublingStats, GridMeasure, a_infinity_report,
                       cube_mass, doubling_stats, from_density, load_measure, save_measure)
from .kernels import (KernelSpec, TruncationLadder, constant, ellipticity, evaluate,
                      evaluate_truncated, fractional, hilbert, kernel_from_name, riesz,
                      validate_cz_bounds)
from .operators import (GridFunction, apply_truncated, dyadic_maximal, fractional_integral,
                        fractional_maximal, maximal_truncation)
from .constants import (ConstantReport, a2_alpha, cancellation_constant,
                        cancellation_constant_dual, kappa_cube_testing,
                        kappa_cube_testing_dual, monomial, one_tailed_a2,
                        one_tailed_a2_dual, poisson)
from .norms import (GoodLambdaResult, RwtResult, best_level_set, bict_constant,
                    good_lambda_verify, restricted_weak_norm, strong_norm, weak_norm)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
