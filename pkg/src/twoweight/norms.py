"""Restricted weak type and bilinear indicator testing norms, weak and strong
operator norms, and the empirical good-lambda check.

The restricted weak type search fixes a cube Q and a truncation, then
alternates between the two sets: with E fixed the best F is a level set of
T(1_E sigma) (see :func:`best_level_set`), and with F fixed the best E is a
level set of the adjoint applied to 1_F omega.  Each half-step solves its
subproblem exactly, so the objective never decreases.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._blocks import CubeBlocks
from .constants import ConstantReport
from .exceptions import ConvergenceError, DegenerateMeasureError
from .geometry import Cube, CubeFamily, as_cube_list
from .kernels import KernelSpec, TruncationLadder, kernel_block
from .measures import AInfinityReport, GridMeasure, stream
from .operators import (GridFunction, fractional_integral_grid, fractional_maximal,
                        maximal_truncation, truncated_matvec)


def best_level_set(g, weight):
    """Exact maximizer of |sum_F g w| / sqrt(sum_F w) over cell unions F.

    Only cells with positive weight are eligible (zero-weight cells change
    neither sum).  For nonnegative weights an optimal F is a superlevel set
    of g or of -g, so scanning the prefixes of both sort orders is exact.

    Returns ``(cells, value)`` with ``cells`` sorted positions into ``g``.
    """
    g = np.asarray(g, dtype=float)
    w = np.asarray(weight, dtype=float)
    eligible = np.nonzero(w > 0)[0]
    if len(eligible) == 0:
        raise DegenerateMeasureError("all weights vanish on the cube")
    best, best_cells = -np.inf, None
    for sign in (1.0, -1.0):
        sg = sign * g[eligible]
        order = np.argsort(-sg, kind="stable")
        vals = np.cumsum(sg[order] * w[eligible][order]) / np.sqrt(np.cumsum(w[eligible][order]))
        k = int(np.argmax(vals))
        if vals[k] > best:
            best, best_cells = float(vals[k]), eligible[order[:k + 1]]
    return np.sort(best_cells), best


def _best_sign_set(g, w):
    """Maximizer of |sum_F g w| over cell unions: all positive or all negative terms."""
    gw = g * w
    pos, neg = gw > 0, gw < 0
    sp, sn = gw[pos].sum(), -gw[neg].sum()
    if sp == 0 and sn == 0:
        return np.nonzero(w > 0)[0]
    return np.nonzero(pos if sp >= sn else neg)[0]


def bilinear(K, s, w, E, F) -> float:
    """sum_{x in F} w(x) sum_{y in E} K(x, y) s(y)."""
    return float(w[F] @ (K[np.ix_(F, E)] @ s[E]))


def rwt_objective(K, s, w, E, F) -> float:
    return abs(bilinear(K, s, w, E, F)) / np.sqrt(s[E].sum() * w[F].sum())


@dataclass
class AlternationTrace:
    E: np.ndarray
    F: np.ndarray
    value: float
    iterations: int
    history: list = field(default_factory=list)


def alternate(K, s, w, E0, max_iters: int = 50, rtol: float = 1e-12) -> AlternationTrace:
    """Alternating exact level-set maximization of the restricted weak type
    objective on one cube.  ``history`` records the objective after every
    half-step."""
    E = np.asarray(E0)
    hist, value, it = [], -np.inf, 0
    F = None
    for it in range(1, max_iters + 1):
        g = K[:, E] @ s[E]
        F, v = best_level_set(g, w)
        hist.append(v / np.sqrt(s[E].sum()))
        h = w[F] @ K[F, :]
        E, v = best_level_set(h, s)
        v /= np.sqrt(w[F].sum())
        hist.append(v)
        if v <= value * (1 + rtol) and value > -np.inf:
            value = max(value, v)
            break
        value = v
    return AlternationTrace(E, F, value, it, hist)


def alternate_bict(K, s, w, E0, max_iters: int = 50) -> AlternationTrace:
    """Same alternation for the bilinear indicator testing objective, whose
    denominator is fixed on a cube: each step keeps the sign set of the
    current potential."""
    norm = np.sqrt(s.sum() * w.sum())
    E = np.asarray(E0)
    hist, value, it = [], -np.inf, 0
    F = None
    for it in range(1, max_iters + 1):
        F = _best_sign_set(K[:, E] @ s[E], w)
        E = _best_sign_set(w[F] @ K[F, :], s)
        v = abs(bilinear(K, s, w, E, F)) / norm
        hist.append(v)
        if v <= value and value > -np.inf:
            break
        value = v
    return AlternationTrace(E, F, max(value, v), it, hist)


def _starts(s, count, rng):
    """E = whole cube, the heaviest single cell, then random nonempty subsets."""
    pos = np.nonzero(s > 0)[0]
    out = [pos]
    if count >= 2:
        out.append(np.array([int(np.argmax(s))]))
    while len(out) < count:
        mask = rng.random(len(s)) < rng.uniform(0.1, 0.9)
        mask &= s > 0
        if not mask.any():
            mask[rng.choice(pos)] = True
        out.append(np.nonzero(mask)[0])
    return out


@dataclass
class RwtResult:
    value: float
    witness_Q: Cube
    witness_E: np.ndarray
    witness_F: np.ndarray
    iterations: int
    starts: int
    pair: tuple = None
    component: int = 0

    def csv_row(self) -> dict:
        return {"value": f"{self.value:.17g}", "Q": self.witness_Q.describe(),
                "E_cells": str(len(self.witness_E)), "F_cells": str(len(self.witness_F)),
                "iterations": str(self.iterations)}


def _check_alpha(kernel, alpha):
    if alpha is not None and not np.isclose(alpha, kernel.alpha):
        raise ValueError(f"alpha={alpha} does not match the kernel's alpha={kernel.alpha}")


def search_family(kernel: KernelSpec, sigma: GridMeasure, omega: GridMeasure,
                  family: CubeFamily, ladder: TruncationLadder, starts: int = 4,
                  max_iters: int = 50, seed: int = 0):
    """Run the restricted weak type and bilinear indicator searches together.

    Returns ``(RwtResult, ConstantReport)``.  The final bilinear indicator
    sets of every cube also seed the restricted weak type search there, so
    the restricted weak type value is never below the indicator one.
    """
    if starts < 1:
        raise ValueError("starts must be >= 1")
    sigma.check_aligned(omega)
    ladder.check_grid(sigma.cell_width, kernel)
    blocks = CubeBlocks(kernel, sigma)
    rwt = None
    bict = (-1.0, None)
    for qi, Q in enumerate(as_cube_list(family)):
        _, idx = blocks.cells(Q)
        s, w = sigma.flat[idx], omega.flat[idx]
        if len(idx) == 0 or s.sum() <= 0 or w.sum() <= 0:
            continue
        rng = stream(seed, "rwt", qi)
        E_starts = _starts(s, starts, rng)
        for pair in ladder.pairs:
            for j in range(kernel.n_components):
                _, K = blocks.block(j, Q, pair)
                bt = [alternate_bict(K, s, w, E0, max_iters) for E0 in E_starts]
                b = max(bt, key=lambda t: t.value)
                if b.value > bict[0]:
                    bict = (b.value, {"cube": Q, "E": idx[b.E], "F": idx[b.F],
                                      "pair": pair, "component": j})
                for E0 in E_starts + [b.E]:
                    tr = alternate(K, s, w, E0, max_iters)
                    if rwt is None or tr.value > rwt.value:
                        rwt = RwtResult(tr.value, Q, idx[tr.E], idx[tr.F], tr.iterations,
                                        starts, pair, j)
    if rwt is None:
        raise DegenerateMeasureError(
            "degenerate measure pair: no cube with both |Q|_sigma > 0 and |Q|_omega > 0")
    witness = dict(bict[1])
    witness["E"] = np.asarray(witness["E"])
    report = ConstantReport("BICT", bict[0], witness, sigma.resolution, kernel.alpha)
    return rwt, report


def restricted_weak_norm(kernel, sigma, omega, alpha=None, family=None, ladder=None,
                         starts: int = 4, max_iters: int = 50, seed: int = 0) -> RwtResult:
    """Restricted weak type norm: sup over cubes Q, truncations and cell
    unions E, F in Q of |sum_F T(1_E sigma) omega| / sqrt(|E|_sigma |F|_omega)."""
    _check_alpha(kernel, alpha)
    return search_family(kernel, sigma, omega, family, ladder, starts, max_iters, seed)[0]


def bict_constant(kernel, sigma, omega, alpha=None, family=None, ladder=None,
                  starts: int = 4, max_iters: int = 50, seed: int = 0) -> ConstantReport:
    """Bilinear indicator/cube testing: as the restricted weak type norm but
    normalized by sqrt(|Q|_sigma |Q|_omega)."""
    _check_alpha(kernel, alpha)
    return search_family(kernel, sigma, omega, family, ladder, starts, max_iters, seed)[1]


def rwt_value_at(kernel, sigma, omega, Q, E, F, pair, j=0) -> float:
    """Re-evaluate the restricted weak type objective at a witness (global
    flat cell indices)."""
    blocks = CubeBlocks(kernel, sigma)
    idx, K = blocks.block(j, Q, pair)
    pos = {c: i for i, c in enumerate(idx)}
    e = np.array([pos[c] for c in E])
    f = np.array([pos[c] for c in F])
    return rwt_objective(K, sigma.flat[idx], omega.flat[idx], e, f)


# --- weak and strong norms ---------------------------------------------------------------

def weak_norm(g, omega: GridMeasure, lambda_grid=None) -> float:
    """Squared weak L^{2,infinity}(omega) quasi-norm sup_lambda lambda^2 omega{|g| > lambda}.

    Because omega sits on cells the supremum is attained as lambda increases
    to one of the values |g(x)|, so it is evaluated exactly at those
    breakpoints; an explicit ``lambda_grid`` is also scanned but can only
    confirm the exact value.
    """
    vals = g.flat if isinstance(g, GridFunction) else np.asarray(g, dtype=float).reshape(-1)
    w = omega.flat
    a = np.abs(vals)
    order = np.argsort(-a, kind="stable")
    best = float(np.max(a[order] ** 2 * np.cumsum(w[order]), initial=0.0))
    if lambda_grid is not None:
        for lam in np.asarray(lambda_grid, dtype=float):
            best = max(best, float(lam * lam * w[a > lam].sum()))
    return best


def weak_type_probe(kernel, sigma, omega, ladder, sets, maximal: bool = False) -> float:
    """Indicator-probed weak type norm: max over E in ``sets`` of
    sqrt(weak_norm(T(1_E sigma))) / sqrt(|E|_sigma).

    With ``maximal=False`` T runs over each ladder truncation separately;
    with ``maximal=True`` the maximal truncation over the ladder is used.
    """
    best = 0.0
    pts = sigma.centers
    for E in sets:
        E = np.asarray(E)
        sE = sigma.flat[E].sum()
        if sE <= 0:
            continue
        f = GridFunction.indicator(sigma, E)
        if maximal:
            wn = weak_norm(maximal_truncation(kernel, f, sigma, ladder), omega)
        else:
            v = f.flat * sigma.flat
            wn = max(weak_norm(truncated_matvec(kernel, j, pts, pts, v, pair), omega)
                     for pair in ladder.pairs for j in range(kernel.n_components))
        best = max(best, np.sqrt(wn / sE))
    return float(best)


def strong_norm(kernel, sigma, omega, alpha=None, pair=None, tol: float = 1e-10,
                max_iters: int = 20000) -> float:
    """Norm of f -> T_{delta,R}(f sigma) from L^2(sigma) to L^2(omega).

    Power iteration on the normal operator written in the symmetric form
    D_sigma^(1/2) K^T D_omega K D_sigma^(1/2); vector kernels take the max
    over components.  The start vector is the constant function plus a
    small deterministic tilt so that it is not orthogonal to the top
    singular vector in symmetric configurations.
    """
    _check_alpha(kernel, alpha)
    sigma.check_aligned(omega)
    pts = sigma.centers
    rs, rw = np.sqrt(sigma.flat), np.sqrt(omega.flat)
    tilt = (pts - np.asarray(sigma.root.center)).sum(axis=1) / sigma.root.side
    best = 0.0
    for j in range(kernel.n_components):
        A = rw[:, None] * kernel_block(kernel, j, pts, pts, pair) * rs[None, :]
        u = rs * (1.0 + 0.25 * tilt)
        nu = np.linalg.norm(u)
        if nu == 0 or not A.any():
            continue
        u /= nu
        lam_prev = -np.inf
        for _ in range(max_iters):
            Au = A @ u
            v = A.T @ Au
            lam = float(Au @ Au)
            nv = np.linalg.norm(v)
            if nv == 0:
                lam = 0.0
                break
            u = v / nv
            if abs(lam - lam_prev) <= tol * lam:
                break
            lam_prev = lam
        else:
            raise ConvergenceError(f"power iteration did not converge in {max_iters} steps",
                                   estimate=float(np.sqrt(lam)), iterate=u)
        best = max(best, float(np.sqrt(max(lam, 0.0))))
    return best


# --- good-lambda --------------------------------------------------------------------------

@dataclass
class GoodLambdaResult:
    lambda_grid: np.ndarray
    lhs: np.ndarray
    rhs: np.ndarray
    ratio: np.ndarray
    c_emp: float
    beta: float
    variant: str
    epsilon: float = float("nan")

    def csv_rows(self) -> list:
        return [{"lambda": f"{l:.17g}", "LHS": f"{a:.17g}", "RHS": f"{b:.17g}",
                 "ratio": f"{r:.17g}"}
                for l, a, b, r in zip(self.lambda_grid, self.lhs, self.rhs, self.ratio)]


def good_lambda_verify(kernel: KernelSpec, f: GridFunction, sigma: GridMeasure,
                       omega: GridMeasure, alpha: float, beta: float, family: CubeFamily,
                       ladder: TruncationLadder, a_inf: AInfinityReport | None = None,
                       n_lambda: int = 64) -> GoodLambdaResult:
    """Empirical constant in the good-lambda inequality.

    With alpha = 0, U is the maximal truncation of f sigma and V its maximal
    function; with alpha > 0, U is the fractional integral and V the
    fractional maximal function.  For each lambda on a geometric grid over
    the positive values of U, LHS = omega{U > 2 lambda, V <= beta lambda},
    RHS = omega{U > lambda}; the ratio is normalized by beta^epsilon
    (alpha = 0) or 1/beta (alpha > 0).
    """
    if not 0 < beta < 1:
        raise ValueError("beta must lie in (0, 1)")
    sigma.check_aligned(f, omega)
    if alpha == 0:
        if not kernel.l2_bounded:
            raise ValueError("the alpha = 0 path needs a kernel bounded on unweighted L^2")
        if a_inf is None:
            raise ValueError("the alpha = 0 path needs the A-infinity exponent of omega")
        U = maximal_truncation(kernel, f, sigma, ladder).flat
        V = fractional_maximal(f, sigma, family, 0.0).flat
        eps = a_inf.epsilon
        factor = beta ** eps
        variant = "CF"
    else:
        nu = GridMeasure(sigma.root, sigma.resolution, np.abs(f.values) * sigma.masses)
        U = fractional_integral_grid(nu, alpha).flat
        V = fractional_maximal(f, sigma, family, alpha).flat
        eps = a_inf.epsilon if a_inf is not None else float("nan")
        factor = 1.0 / beta
        variant = "fractional"
    w = omega.flat
    positive = U[U > 0]
    if positive.size == 0:
        empty = np.empty(0)
        return GoodLambdaResult(empty, empty, empty, empty, 0.0, beta, variant, eps)
    lam = np.geomspace(positive.min() / 2.0, positive.max(), n_lambda)
    lhs = np.array([w[(U > 2 * l) & (V <= beta * l)].sum() for l in lam])
    rhs = np.array([w[U > l].sum() for l in lam])
    ratio = np.where(rhs > 0, lhs / np.where(rhs > 0, factor * rhs, 1.0), 0.0)
    c_emp = float(ratio[rhs > 0].max(initial=0.0))
    return GoodLambdaResult(lam, lhs, rhs, ratio, c_emp, beta, variant, eps)
