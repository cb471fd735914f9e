"""Muckenhoupt-type constants, Poisson tails, polynomial cube testing and
cancellation constants over a discretized measure pair.

Every estimator returns a :class:`ConstantReport` carrying the maximizing
configuration, which can be fed back to the matching ``*_value`` function
to reproduce the number.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from ._blocks import CubeBlocks
from .exceptions import DegenerateMeasureError
from .geometry import Cube, CubeFamily, as_cube_list
from .kernels import KernelSpec, TruncationLadder, kernel_block
from .measures import GridMeasure, cube_mass, stream

CSV_FIELDS = ("name", "value", "alpha", "kappa", "L", "witness_description")


@dataclass
class ConstantReport:
    """A named constant, the maximum over the enumerated search space."""

    name: str
    value: float
    witness: dict
    resolution: int
    alpha: float = 0.0
    kappa: int = 0
    breakdown: dict = field(default_factory=dict, repr=False)

    def witness_description(self) -> str:
        parts = []
        for key, val in self.witness.items():
            if isinstance(val, Cube):
                val = val.describe()
            elif isinstance(val, (tuple, list, np.ndarray)):
                val = "[" + " ".join(f"{float(v):.17g}" for v in np.ravel(val)) + "]"
            elif isinstance(val, float):
                val = f"{val:.17g}"
            parts.append(f"{key}={val}")
        return "; ".join(parts)

    def csv_row(self) -> dict:
        return {"name": self.name, "value": f"{self.value:.17g}",
                "alpha": f"{self.alpha:.17g}", "kappa": str(self.kappa),
                "L": str(self.resolution),
                "witness_description": self.witness_description()}


def _pair_grid(sigma: GridMeasure, omega: GridMeasure):
    sigma.check_aligned(omega)
    return sigma


def _cubes(family):
    cubes = as_cube_list(family)
    if not cubes:
        raise ValueError("cube family is empty")
    return cubes


# --- A_2^alpha ----------------------------------------------------------------

def a2_value(sigma, omega, alpha, Q: Cube) -> float:
    n = sigma.n
    return cube_mass(sigma, Q) * cube_mass(omega, Q) / Q.volume() ** (2 - 2 * alpha / n)


def a2_alpha(sigma: GridMeasure, omega: GridMeasure, alpha: float,
             family: CubeFamily) -> ConstantReport:
    """max over family cubes of |Q|_sigma |Q|_omega / |Q|^(2 - 2 alpha / n)."""
    _pair_grid(sigma, omega)
    best, arg = -1.0, None
    for Q in _cubes(family):
        v = a2_value(sigma, omega, alpha, Q)
        if v > best:
            best, arg = v, Q
    return ConstantReport("A2", best, {"cube": arg}, sigma.resolution, alpha)


# --- Poisson tails and the one-tailed constants -----------------------------------

def poisson(Q: Cube, mu: GridMeasure, alpha: float) -> float:
    """Reproducing Poisson integral of mu around Q."""
    n = mu.n
    if not 0 <= alpha < n:
        raise ValueError("alpha must lie in [0, n)")
    ell = Q.volume() ** (1.0 / n)
    d = np.linalg.norm(mu.centers - np.asarray(Q.center), axis=1)
    return float(np.dot((ell / (ell + d) ** 2) ** (n - alpha), mu.flat))


def one_tailed_value(sigma, omega, alpha, Q: Cube) -> float:
    n = sigma.n
    return poisson(Q, sigma, alpha) * cube_mass(omega, Q) / Q.volume() ** (1 - alpha / n)


def one_tailed_a2(sigma: GridMeasure, omega: GridMeasure, alpha: float,
                  family: CubeFamily, name: str = "A2_one_tailed") -> ConstantReport:
    """max over Q of P^alpha(Q, sigma) |Q|_omega / |Q|^(1 - alpha/n)."""
    _pair_grid(sigma, omega)
    best, arg = -1.0, None
    for Q in _cubes(family):
        v = one_tailed_value(sigma, omega, alpha, Q)
        if v > best:
            best, arg = v, Q
    return ConstantReport(name, best, {"cube": arg}, sigma.resolution, alpha)


def one_tailed_a2_dual(sigma, omega, alpha, family) -> ConstantReport:
    """The dual constant, by definition the one-tailed constant of (omega, sigma)."""
    return one_tailed_a2(omega, sigma, alpha, family, name="A2_one_tailed_dual")


# --- polynomial cube testing ----------------------------------------------------------

def multiindices(n: int, kappa: int) -> list:
    """Multiindices beta with |beta| < kappa, by degree then lexicographically."""
    out = []
    for deg in range(max(kappa, 0)):
        out.extend(b for b in itertools.product(range(deg + 1), repeat=n)
                   if sum(b) == deg)
    return out


def monomial(Q: Cube, beta, x) -> np.ndarray:
    """m_Q^beta(x) = ((x - c_Q) / side(Q))^beta, vectorized over leading axes of x."""
    beta = tuple(int(b) for b in np.atleast_1d(beta))
    if any(b < 0 for b in beta):
        raise ValueError("multiindex entries must be nonnegative")
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        x = x.reshape(1)
    if x.shape[-1] != Q.n or len(beta) != Q.n:
        raise ValueError("dimension mismatch between cube, multiindex and point")
    u = (x - np.asarray(Q.center)) / Q.side
    out = np.ones(x.shape[:-1])
    for i, b in enumerate(beta):
        if b:
            out = out * u[..., i] ** b
    return out if out.ndim else float(out)


def kappa_testing_value(kernel, sigma, omega, Q, beta, pair, j=0, blocks=None) -> float:
    """(1/|Q|_sigma) sum_{x in Q} |T_{delta,R}(1_Q m_Q^beta sigma)(x)|^2 omega(x)."""
    blocks = blocks or CubeBlocks(kernel, sigma)
    idx, K = blocks.block(j, Q, pair)
    s, w = sigma.flat[idx], omega.flat[idx]
    sq = s.sum()
    if sq <= 0:
        return float("nan")
    g = K @ (monomial(Q, beta, sigma.centers[idx]) * s)
    return float(np.dot(g * g, w) / sq)


def kappa_cube_testing(kernel: KernelSpec, sigma: GridMeasure, omega: GridMeasure,
                       kappa: int, family: CubeFamily, ladder: TruncationLadder,
                       name: str = "testing") -> ConstantReport:
    """Polynomial cube testing constant; ``value`` is the square root of the
    max over cubes, multiindices |beta| < kappa, ladder pairs and components.

    ``breakdown`` maps each ladder pair to its own (unsquared) maximum.
    """
    if kappa < 1:
        raise ValueError("kappa must be >= 1")
    _pair_grid(sigma, omega)
    ladder.check_grid(sigma.cell_width, kernel)
    betas = multiindices(sigma.n, kappa)
    blocks = CubeBlocks(kernel, sigma)
    best, arg = -1.0, None
    per_pair = {p: 0.0 for p in ladder.pairs}
    for Q in _cubes(family):
        _, idx = blocks.cells(Q)
        s, w = sigma.flat[idx], omega.flat[idx]
        sq = s.sum()
        if len(idx) == 0 or sq <= 0:
            continue
        M = np.stack([monomial(Q, b, sigma.centers[idx]) for b in betas], axis=1) * s[:, None]
        for pair in ladder.pairs:
            for j in range(kernel.n_components):
                _, K = blocks.block(j, Q, pair)
                # one matvec per multiindex, so a column's value does not depend
                # on how many other columns there are (keeps kappa-monotonicity exact)
                G = np.stack([K @ M[:, b] for b in range(M.shape[1])], axis=1)
                vals = (G * G * w[:, None]).sum(axis=0) / sq
                b = int(np.argmax(vals))
                per_pair[pair] = max(per_pair[pair], float(vals[b]))
                if vals[b] > best:
                    best = float(vals[b])
                    arg = {"cube": Q, "beta": betas[b], "pair": pair, "component": j}
    if arg is None:
        raise DegenerateMeasureError("degenerate measure: |Q|_sigma = 0 for every cube")
    return ConstantReport(name, float(np.sqrt(best)), arg, sigma.resolution,
                          kernel.alpha, kappa,
                          {p: float(np.sqrt(v)) for p, v in per_pair.items()})


def kappa_cube_testing_dual(kernel, sigma, omega, kappa, family, ladder) -> ConstantReport:
    """Testing for the adjoint operator with the measures exchanged."""
    return kappa_cube_testing(kernel.adjoint(), omega, sigma, kappa, family, ladder,
                              name="testing_dual")


# --- cancellation constants -------------------------------------------------------------

def _poly_basis(x0, N, kappa, pts):
    u = (pts - x0) / N
    betas = multiindices(len(x0), kappa)
    cols = []
    for b in betas:
        c = np.ones(len(pts))
        for i, e in enumerate(b):
            if e:
                c = c * u[:, i] ** e
        cols.append(c)
    return betas, np.stack(cols, axis=1)


def _coefficients(n, kappa, poly_trials, rng):
    nb = len(multiindices(n, kappa))
    coeffs = [np.eye(nb)[i] for i in range(nb)]
    coeffs.extend(rng.normal(size=nb) for _ in range(poly_trials))
    return np.stack(coeffs, axis=1)                        # (basis, polys)


def cancellation_value(kernel, sigma, omega, x0, N, eps, coeffs, kappa, j=0) -> float:
    """Left side of the cancellation inequality divided by |B(x0, N)|_sigma
    for the polynomial with the given coefficients in the scaled monomial
    basis ((y - x0) / N)^beta."""
    vals = _cancellation_block(kernel, sigma, omega, np.asarray(x0, float), N, eps,
                               np.asarray(coeffs, float).reshape(-1, 1), kappa, j)
    return float(vals[0]) if vals is not None else float("nan")


def _cancellation_block(kernel, sigma, omega, x0, N, eps, coeffs, kappa, j):
    pts = sigma.centers
    dist = np.linalg.norm(pts - x0, axis=1)
    ball = np.nonzero(dist < N)[0]
    sb = sigma.flat[ball].sum()
    if len(ball) == 0 or sb <= 0:
        return None
    reach = np.nonzero(dist < 2 * N)[0]
    _, P = _poly_basis(x0, N, kappa, pts[reach])
    P = P @ coeffs                                          # (reach, polys)
    in_ball = dist[reach] < N
    sup = np.abs(P[in_ball]).max(axis=0)
    sup = np.where(sup > 0, sup, np.nan)
    K = kernel_block(kernel, j, pts[ball], pts[reach], (eps, N))
    G = K @ (P * sigma.flat[reach][:, None] / sup)
    return (G * G * omega.flat[ball][:, None]).sum(axis=0) / sb


def cancellation_constant(kernel: KernelSpec, sigma: GridMeasure, omega: GridMeasure,
                          kappa: int, centers, radii, eps_ladder, poly_trials: int = 8,
                          seed: int = 0, name: str = "cancellation") -> ConstantReport:
    """Largest observed cancellation ratio over centers, radii, inner
    truncations and polynomials of degree < kappa.

    The polynomial search space is every monomial plus ``poly_trials`` random
    combinations, each normalized by its largest magnitude over cell centers
    in the ball.  Balls with no sigma mass and pairs with eps >= N are skipped.
    """
    if kappa < 1:
        raise ValueError("kappa must be >= 1")
    _pair_grid(sigma, omega)
    centers = np.asarray(centers, dtype=float).reshape(-1, sigma.n)
    coeffs = _coefficients(sigma.n, kappa, poly_trials, stream(seed, name))
    best, arg = -1.0, None
    for x0 in centers:
        for N in radii:
            for eps in eps_ladder:
                if not eps < N:
                    continue
                if eps < sigma.cell_width * (1 - 1e-9):
                    raise ValueError("eps must be at least one cell width")
                for j in range(kernel.n_components):
                    vals = _cancellation_block(kernel, sigma, omega, x0, N, eps,
                                               coeffs, kappa, j)
                    if vals is None:
                        continue
                    vals = np.nan_to_num(vals, nan=-1.0)
                    p = int(np.argmax(vals))
                    if vals[p] > best:
                        best = float(vals[p])
                        arg = {"x0": tuple(x0), "N": float(N), "eps": float(eps),
                               "coefficients": coeffs[:, p].copy(), "component": j}
    if arg is None:
        raise DegenerateMeasureError("degenerate measure: every ball has zero sigma mass")
    return ConstantReport(name, best, arg, sigma.resolution, kernel.alpha, kappa)


def cancellation_constant_dual(kernel, sigma, omega, kappa, centers, radii, eps_ladder,
                               poly_trials=8, seed=0) -> ConstantReport:
    """Adjoint kernel with sigma and omega exchanged."""
    return cancellation_constant(kernel.adjoint(), omega, sigma, kappa, centers, radii,
                                 eps_ladder, poly_trials, seed, name="cancellation_dual")
