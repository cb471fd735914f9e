"""Discrete singular integrals, maximal truncations, fractional maximal
functions and the fractional integral, all by midpoint quadrature at cell
centers."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import CubeFamily, cell_index_ranges, cell_of_point, enumerate_cubes
from .kernels import _EDGE, KernelSpec, TruncationLadder, kernel_block
from .measures import GridMeasure, _frozen, _GridData, dumps_grid, loads_grid

# Entries per row block when forming dense kernel matrices.
_BLOCK = 1 << 21


@dataclass(frozen=True, eq=False)
class GridFunction(_GridData):
    """Real values sampled at the cell centers of a grid."""

    root: object
    resolution: int
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.size != self.n_cells:
            raise ValueError(f"expected {self.n_cells} values, got {v.size}")
        if not np.all(np.isfinite(v)):
            raise ValueError("grid function values must be finite")
        object.__setattr__(self, "values", _frozen(v.reshape(self.shape)))

    @property
    def flat(self) -> np.ndarray:
        return self.values.reshape(-1)

    @classmethod
    def like(cls, grid, values) -> "GridFunction":
        return cls(grid.root, grid.resolution, values)

    @classmethod
    def constant(cls, grid, c: float = 1.0) -> "GridFunction":
        return cls(grid.root, grid.resolution, np.full(grid.shape, float(c)))

    @classmethod
    def indicator(cls, grid, cells) -> "GridFunction":
        v = np.zeros(grid.n_cells)
        v[np.asarray(cells)] = 1.0
        return cls(grid.root, grid.resolution, v)

    @classmethod
    def from_callable(cls, grid, f) -> "GridFunction":
        return cls(grid.root, grid.resolution, np.asarray(f(grid.centers), dtype=float))

    def dumps(self) -> str:
        return dumps_grid(self, self.flat)

    @classmethod
    def loads(cls, text: str) -> "GridFunction":
        root, L, values = loads_grid(text)
        return cls(root, L, values)


def _rows(N, M):
    step = max(1, _BLOCK // max(M, 1))
    for s in range(0, N, step):
        yield slice(s, min(N, s + step))


def truncated_matvec(kernel: KernelSpec, j: int, X, Y, v, pair) -> np.ndarray:
    """sum_k K_j(X_i, Y_k) 1{delta <= |X_i - Y_k| < R} v_k for every i."""
    X = np.asarray(X).reshape(-1, kernel.n)
    out = np.empty(len(X))
    for rows in _rows(len(X), len(Y)):
        out[rows] = kernel_block(kernel, j, X[rows], Y, pair) @ v
    return out


def apply_truncated(kernel: KernelSpec, j: int, f: GridFunction, sigma: GridMeasure,
                    pair) -> GridFunction:
    """T_{delta,R}(f sigma) at every cell center, for kernel component ``j``."""
    sigma.check_aligned(f)
    pts = sigma.centers
    vals = truncated_matvec(kernel, j, pts, pts, f.flat * sigma.flat, pair)
    return GridFunction.like(sigma, vals)


def annular_sums(kernel: KernelSpec, j: int, X, Y, v, breakpoints) -> np.ndarray:
    """Cumulative kernel sums over the annuli between consecutive breakpoints.

    Returns ``C`` of shape ``(len(X), m)`` with ``C[:, k]`` the sum over
    ``b_0 <= r < b_k``; the sum for a pair ``(b_i, b_l)`` is
    ``C[:, l] - C[:, i]``.
    """
    b = np.asarray(breakpoints, dtype=float)
    X = np.asarray(X).reshape(-1, kernel.n)
    Y = np.asarray(Y).reshape(-1, kernel.n)
    m = len(b)
    C = np.zeros((len(X), m))
    for rows in _rows(len(X), len(Y)):
        d = X[rows, None, :] - Y[None, :, :]
        r = np.sqrt(np.sum(d * d, axis=-1))
        K = kernel_block(kernel, j, X[rows], Y)
        # annulus index consistent with truncation_mask's closed inner face
        a = np.searchsorted(b, r / (1 - _EDGE), side="right") - 1
        for k in range(m - 1):
            C[rows, k + 1] = np.where(a == k, K, 0.0) @ v
    return np.cumsum(C, axis=1)


def maximal_truncation(kernel: KernelSpec, f: GridFunction, sigma: GridMeasure,
                       ladder: TruncationLadder) -> GridFunction:
    """Pointwise max over components and ladder pairs of |T_{delta,R}(f sigma)|."""
    if not isinstance(ladder, TruncationLadder):
        ladder = TruncationLadder(tuple(ladder))
    sigma.check_aligned(f)
    b = ladder.breakpoints()
    pos = {float(v): i for i, v in enumerate(b)}
    lo = np.array([pos[d] for d, _ in ladder.pairs])
    hi = np.array([pos[R] for _, R in ladder.pairs])
    pts = sigma.centers
    v = f.flat * sigma.flat
    out = np.zeros(sigma.n_cells)
    for j in range(kernel.n_components):
        C = annular_sums(kernel, j, pts, pts, v, b)
        out = np.maximum(out, np.abs(C[:, hi] - C[:, lo]).max(axis=1))
    return GridFunction.like(sigma, out)


def fractional_maximal(f: GridFunction, sigma: GridMeasure, family: CubeFamily,
                       alpha: float) -> GridFunction:
    """M^alpha(f sigma)(x) = max over family cubes Q containing x of
    |Q|^(alpha/n - 1) * sum_Q |f| sigma."""
    sigma.check_aligned(f)
    n = sigma.n
    if not 0 <= alpha < n:
        raise ValueError("alpha must lie in [0, n)")
    g = np.abs(f.values) * sigma.masses
    out = np.zeros(sigma.shape)
    for Q in enumerate_cubes(family):
        sl = tuple(slice(s, e) for s, e in cell_index_ranges(sigma.root, sigma.resolution, Q))
        if any(s.stop <= s.start for s in sl):
            continue
        avg = g[sl].sum() * Q.volume() ** (alpha / n - 1.0)
        np.maximum(out[sl], avg, out=out[sl])
    return GridFunction.like(sigma, out)


def dyadic_maximal(f: GridFunction, sigma: GridMeasure, grid: CubeFamily,
                   alpha: float) -> GridFunction:
    """M_D^alpha: as :func:`fractional_maximal` over one unshifted dyadic grid."""
    if grid.shifted:
        grid = CubeFamily.dyadic(grid.root, grid.max_level)
    return fractional_maximal(f, sigma, grid, alpha)


def _self_weight(nu: GridMeasure, alpha: float) -> float:
    return (nu.cell_width / 2.0) ** (alpha - nu.n)


def fractional_integral(nu: GridMeasure, alpha: float, x) -> float:
    """I^alpha nu(x) = integral of |x - y|^(alpha - n) d nu(y).

    Cells other than the one containing x contribute at their centers; the
    own cell (if x lies in the root) contributes nu(cell) * (w/2)^(alpha - n).
    """
    if alpha == 0:
        raise ValueError("the fractional integral is undefined for alpha = 0")
    n = nu.n
    if not 0 < alpha < n:
        raise ValueError("alpha must lie in (0, n)")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    r = np.linalg.norm(nu.centers - x, axis=1)
    m = nu.flat.copy()
    self_mass = 0.0
    if nu.root.contains_point(x):
        own = cell_of_point(nu.root, nu.resolution, x)
        self_mass = m[own]
        m[own] = 0.0
    with np.errstate(divide="ignore"):
        w = np.where(r > 0, r, 1.0) ** (alpha - n)
    return float(np.dot(w, m) + self_mass * _self_weight(nu, alpha))


def fractional_integral_grid(nu: GridMeasure, alpha: float) -> GridFunction:
    """I^alpha nu evaluated at every cell center."""
    if alpha == 0:
        raise ValueError("the fractional integral is undefined for alpha = 0")
    n = nu.n
    if not 0 < alpha < n:
        raise ValueError("alpha must lie in (0, n)")
    pts = nu.centers
    m = nu.flat
    out = np.empty(nu.n_cells)
    for rows in _rows(len(pts), len(pts)):
        d = pts[rows, None, :] - pts[None, :, :]
        r = np.sqrt(np.sum(d * d, axis=-1))
        with np.errstate(divide="ignore"):
            W = np.where(r > 0, r, np.inf) ** (alpha - n)
        out[rows] = W @ m
    out += m * _self_weight(nu, alpha)
    return GridFunction.like(nu, out)
