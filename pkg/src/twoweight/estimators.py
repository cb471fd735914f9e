"""Scikit-learn style wrappers.

Constant estimators are fitted on a measure pair, ``fit(sigma, omega)``,
and expose ``value_`` and ``report_``.  Operator transformers are fitted on
the underlying measure ``sigma`` and map grid functions (or flat value
arrays) to flat arrays of operator values.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .constants import a2_alpha, kappa_cube_testing, one_tailed_a2
from .geometry import CubeFamily
from .kernels import KernelSpec, TruncationLadder, kernel_from_name
from .measures import GridMeasure
from .norms import restricted_weak_norm, strong_norm
from .operators import (GridFunction, fractional_integral_grid, fractional_maximal,
                        maximal_truncation)


# --- validation helpers ----------------------------------------------------------

def check_measure(mu, name="measure") -> GridMeasure:
    if not isinstance(mu, GridMeasure):
        raise TypeError(f"{name} must be a GridMeasure, got {type(mu).__name__}")
    return mu


def check_pair(sigma, omega):
    check_measure(sigma, "sigma")
    if omega is None:
        raise ValueError("a second measure omega is required")
    check_measure(omega, "omega")
    sigma.check_aligned(omega)
    return sigma, omega


def check_kernel(kernel, n: int) -> KernelSpec:
    if isinstance(kernel, KernelSpec):
        if kernel.n != n:
            raise ValueError(f"kernel is {kernel.n}-dimensional, measures are {n}-dimensional")
        return kernel
    return kernel_from_name(str(kernel), n)


def check_grid_function(f, grid) -> GridFunction:
    """Accept a GridFunction or any array with one value per cell."""
    if isinstance(f, GridFunction):
        grid.check_aligned(f)
        return f
    values = np.asarray(f, dtype=float)
    if values.size != grid.n_cells:
        raise ValueError(f"expected {grid.n_cells} values, got {values.size}")
    if not np.all(np.isfinite(values)):
        raise ValueError("grid function values must be finite")
    return GridFunction(grid.root, grid.resolution, values.reshape(grid.shape))


def resolve_family(grid, max_level, shifts) -> CubeFamily:
    level = max(grid.resolution - 3, 0) if max_level is None else int(max_level)
    if level < 0 or level > grid.resolution:
        raise ValueError("max_level must lie in [0, L]")
    return CubeFamily(grid.root, level) if shifts else CubeFamily.dyadic(grid.root, level)


def resolve_ladder(grid, ladder) -> TruncationLadder:
    if ladder is None:
        return TruncationLadder.single(grid.cell_width, 2 * grid.root.diameter())
    if isinstance(ladder, TruncationLadder):
        return ladder
    return TruncationLadder(tuple(tuple(p) for p in ladder))


# --- constants ----------------------------------------------------------------------

class _PairConstant(BaseEstimator):
    """Shared fit plumbing: validate the pair, build the family, compute."""

    def _compute(self, sigma, omega, family):
        raise NotImplementedError

    def fit(self, X, y=None):
        sigma, omega = check_pair(X, y)
        self.family_ = resolve_family(sigma, self.max_level, self.shifts)
        self.report_ = self._compute(sigma, omega, self.family_)
        self.value_ = float(self.report_.value)
        self.n_cells_ = sigma.n_cells
        return self

    def score(self, X=None, y=None):
        check_is_fitted(self, "value_")
        return self.value_


class MuckenhouptA2(_PairConstant):
    """Fractional Muckenhoupt constant over shifted dyadic cubes."""

    def __init__(self, alpha=0.0, max_level=None, shifts=True):
        self.alpha = alpha
        self.max_level = max_level
        self.shifts = shifts

    def _compute(self, sigma, omega, family):
        return a2_alpha(sigma, omega, self.alpha, family)


class OneTailedA2(_PairConstant):
    """One-tailed constant; ``dual=True`` swaps the roles of the measures."""

    def __init__(self, alpha=0.0, max_level=None, shifts=True, dual=False):
        self.alpha = alpha
        self.max_level = max_level
        self.shifts = shifts
        self.dual = dual

    def _compute(self, sigma, omega, family):
        if self.dual:
            return one_tailed_a2(omega, sigma, self.alpha, family, name="A2_one_tailed_dual")
        return one_tailed_a2(sigma, omega, self.alpha, family)


class RestrictedWeakType(_PairConstant):
    """Restricted weak type norm found by alternating level-set search."""

    def __init__(self, kernel="hilbert", max_level=None, shifts=True, ladder=None,
                 starts=4, max_iters=50, random_state=0):
        self.kernel = kernel
        self.max_level = max_level
        self.shifts = shifts
        self.ladder = ladder
        self.starts = starts
        self.max_iters = max_iters
        self.random_state = random_state

    def _compute(self, sigma, omega, family):
        kernel = check_kernel(self.kernel, sigma.n)
        self.kernel_ = kernel
        return restricted_weak_norm(kernel, sigma, omega, None, family,
                                    resolve_ladder(sigma, self.ladder), self.starts,
                                    self.max_iters, int(self.random_state))


class PolynomialTesting(_PairConstant):
    """kappa-cube testing constant (``dual=True`` for the adjoint side)."""

    def __init__(self, kernel="hilbert", kappa=2, max_level=None, shifts=True, ladder=None,
                 dual=False):
        self.kernel = kernel
        self.kappa = kappa
        self.max_level = max_level
        self.shifts = shifts
        self.ladder = ladder
        self.dual = dual

    def _compute(self, sigma, omega, family):
        kernel = check_kernel(self.kernel, sigma.n)
        ladder = resolve_ladder(sigma, self.ladder)
        if self.dual:
            return kappa_cube_testing(kernel.adjoint(), omega, sigma, self.kappa, family,
                                      ladder, name="testing_dual")
        return kappa_cube_testing(kernel, sigma, omega, self.kappa, family, ladder)


class StrongNorm(BaseEstimator):
    """L^2(sigma) -> L^2(omega) norm of one truncation of the operator."""

    def __init__(self, kernel="hilbert", pair=None, tol=1e-10, max_iters=20000):
        self.kernel = kernel
        self.pair = pair
        self.tol = tol
        self.max_iters = max_iters

    def fit(self, X, y=None):
        sigma, omega = check_pair(X, y)
        kernel = check_kernel(self.kernel, sigma.n)
        pair = resolve_ladder(sigma, None).pairs[0] if self.pair is None else tuple(self.pair)
        self.value_ = float(strong_norm(kernel, sigma, omega, pair=pair, tol=self.tol,
                                        max_iters=self.max_iters))
        return self

    def score(self, X=None, y=None):
        check_is_fitted(self, "value_")
        return self.value_


# --- operators ---------------------------------------------------------------------

class _OperatorTransformer(BaseEstimator, TransformerMixin):
    def fit(self, X, y=None):
        self.sigma_ = check_measure(X, "sigma")
        return self

    def transform(self, X):
        check_is_fitted(self, "sigma_")
        f = check_grid_function(X, self.sigma_)
        return self._apply(f).flat.copy()


class MaximalTruncation(_OperatorTransformer):
    """f -> max over ladder pairs and components of |T_{delta,R}(f sigma)|."""

    def __init__(self, kernel="hilbert", ladder=None):
        self.kernel = kernel
        self.ladder = ladder

    def _apply(self, f):
        kernel = check_kernel(self.kernel, self.sigma_.n)
        ladder = (TruncationLadder.dyadic(self.sigma_.cell_width, self.sigma_.root.diameter())
                  if self.ladder is None else resolve_ladder(self.sigma_, self.ladder))
        return maximal_truncation(kernel, f, self.sigma_, ladder)


class FractionalMaximal(_OperatorTransformer):
    """f -> M^alpha(f sigma) over a shifted dyadic family."""

    def __init__(self, alpha=0.0, max_level=None, shifts=True):
        self.alpha = alpha
        self.max_level = max_level
        self.shifts = shifts

    def _apply(self, f):
        family = resolve_family(self.sigma_, self.max_level, self.shifts)
        return fractional_maximal(f, self.sigma_, family, self.alpha)


class FractionalIntegral(_OperatorTransformer):
    """f -> I^alpha(f sigma) at every cell center (alpha > 0)."""

    def __init__(self, alpha=0.5):
        self.alpha = alpha

    def _apply(self, f):
        nu = GridMeasure(self.sigma_.root, self.sigma_.resolution,
                         np.abs(f.flat) * self.sigma_.flat)
        return fractional_integral_grid(nu, self.alpha)
