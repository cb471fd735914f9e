"""Fractional Calderon-Zygmund kernels, sharp truncations and numerical
checks of the size, smoothness and ellipticity bounds."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .exceptions import SingularEvaluationError

# Faces of a truncation annulus are compared with this relative slack so
# that grid distances that equal delta or R up to round-off are classified
# consistently.
_EDGE = 1e-9


@dataclass(frozen=True)
class KernelSpec:
    """A (possibly vector-valued) alpha-fractional kernel.

    Each component is a vectorized callable ``K_j(x, y)`` taking arrays whose
    last axis has length ``n`` and broadcasting over the rest.  ``c_cz``,
    ``delta``, ``kappa1`` and ``kappa2`` are the declared constants; the
    checks in this module measure them independently.
    """

    name: str
    n: int
    alpha: float
    components: tuple = field(repr=False)
    c_cz: float = 1.0
    delta: float = 1.0
    kappa1: int = 0
    kappa2: int = 0
    # T^0 bounded on unweighted L^2 (needed by the alpha = 0 good-lambda path)
    l2_bounded: bool = False
    translation_invariant: bool = True
    # singular kernels are never evaluated on the diagonal; bounded test
    # kernels keep it unless a truncation removes it
    singular: bool = True

    def __post_init__(self):
        if not 0 <= self.alpha < self.n:
            raise ValueError(f"alpha must lie in [0, n), got {self.alpha}")
        if not 0 < self.delta <= 1:
            raise ValueError("Hoelder exponent delta must lie in (0, 1]")
        if self.c_cz <= 0:
            raise ValueError("c_cz must be positive")
        object.__setattr__(self, "components", tuple(self.components))
        if not self.components:
            raise ValueError("kernel needs at least one component")

    @property
    def n_components(self) -> int:
        return len(self.components)

    def adjoint(self) -> "KernelSpec":
        """Kernel with the roles of x and y exchanged."""
        comps = tuple(_swap(k) for k in self.components)
        return KernelSpec(self.name + "*", self.n, self.alpha, comps, self.c_cz,
                          self.delta, self.kappa2, self.kappa1, self.l2_bounded,
                          self.translation_invariant, self.singular)


def _swap(k: Callable) -> Callable:
    def swapped(x, y):
        return k(y, x)
    swapped.__wrapped__ = k
    return swapped


# --- built-ins ---------------------------------------------------------------

def _hilbert(x, y):
    return 1.0 / (x[..., 0] - y[..., 0])


def hilbert() -> KernelSpec:
    """H(x, y) = 1 / (x - y) on the line."""
    return KernelSpec("hilbert", 1, 0.0, (_hilbert,), c_cz=1.0, delta=1.0,
                      kappa1=1, kappa2=1, l2_bounded=True)


def _riesz_component(j: int, n: int):
    def comp(x, y):
        d = x - y
        r = np.sqrt(np.sum(d * d, axis=-1))
        return d[..., j] / r ** (n + 1)
    return comp


def riesz(n: int) -> KernelSpec:
    """Vector Riesz kernel R_j(x, y) = (x_j - y_j) / |x - y|^(n+1)."""
    comps = tuple(_riesz_component(j, n) for j in range(n))
    return KernelSpec("riesz", n, 0.0, comps, c_cz=1.0, delta=1.0, kappa1=1,
                      kappa2=1, l2_bounded=True)


def fractional(alpha: float, n: int = 1) -> KernelSpec:
    """Positive kernel |x - y|^(alpha - n), 0 < alpha < n."""
    if not 0 < alpha < n:
        raise ValueError("fractional kernel needs 0 < alpha < n")

    def comp(x, y):
        d = x - y
        return np.sqrt(np.sum(d * d, axis=-1)) ** (alpha - n)
    return KernelSpec(f"fractional:{alpha:g}", n, float(alpha), (comp,),
                      c_cz=1.0, delta=1.0, kappa1=1, kappa2=1)


def constant(n: int = 1, value: float = 1.0) -> KernelSpec:
    """K(x, y) = value everywhere.  A test stub, not a CZ kernel."""
    value = float(value)

    def comp(x, y):
        return np.full(np.broadcast_shapes(x.shape[:-1], y.shape[:-1]), value)
    return KernelSpec(f"constant:{value:g}", n, 0.0, (comp,),
                      c_cz=max(abs(value), 1.0), singular=False)


def kernel_from_name(name: str, n: int = 1) -> KernelSpec:
    """Resolve ``hilbert``, ``riesz``, ``fractional:ALPHA`` or ``constant[:C]``."""
    key, _, arg = name.strip().partition(":")
    key = key.lower()
    if key == "hilbert":
        if n != 1:
            raise ValueError("the Hilbert kernel lives on the line (n = 1)")
        return hilbert()
    if key == "riesz":
        return riesz(n)
    if key == "fractional":
        if not arg:
            raise ValueError("fractional kernel needs an exponent, e.g. fractional:0.5")
        return fractional(float(arg), n)
    if key == "constant":
        return constant(n, float(arg) if arg else 1.0)
    raise ValueError(f"unknown kernel {name!r}")


# --- evaluation ----------------------------------------------------------------

def _point(x, n):
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (n,):
        raise ValueError(f"expected a point in R^{n}, got shape {x.shape}")
    return x


def evaluate(kernel: KernelSpec, j: int, x, y) -> float:
    x, y = _point(x, kernel.n), _point(y, kernel.n)
    if kernel.singular and np.array_equal(x, y):
        raise SingularEvaluationError(f"kernel evaluated on the diagonal at {x}")
    return float(kernel.components[j](x, y))


def truncation_mask(r, delta: float, R: float):
    """Indicator of the annulus delta <= r < R.

    The inner face is closed so that with delta equal to the cell width the
    nearest neighbours of a cell are kept while the cell itself (r = 0) is not.
    """
    r = np.asarray(r)
    return (r >= delta * (1 - _EDGE)) & (r < R * (1 - _EDGE))


def _check_pair(pair):
    """Validate (delta, R).  delta = 0 means no inner cutoff, which only a
    bounded (non-singular) kernel can use."""
    delta, R = pair
    if not 0 <= delta < R:
        raise ValueError(f"truncation needs 0 <= delta < R, got {pair}")
    return float(delta), float(R)


def evaluate_truncated(kernel: KernelSpec, j: int, x, y, pair) -> float:
    delta, R = _check_pair(pair)
    x, y = _point(x, kernel.n), _point(y, kernel.n)
    r = float(np.linalg.norm(x - y))
    if not truncation_mask(r, delta, R) or (kernel.singular and r == 0):
        return 0.0
    return float(kernel.components[j](x, y))


def kernel_block(kernel: KernelSpec, j: int, X, Y, pair=None) -> np.ndarray:
    """Matrix ``M[i, k] = K_j(X_i, Y_k)``, zero outside the truncation
    annulus when a pair is given, and zero on the diagonal for singular
    kernels."""
    X = np.asarray(X, dtype=float).reshape(-1, kernel.n)
    Y = np.asarray(Y, dtype=float).reshape(-1, kernel.n)
    d = X[:, None, :] - Y[None, :, :]
    r = np.sqrt(np.sum(d * d, axis=-1))
    keep = np.ones(r.shape, bool) if pair is None else truncation_mask(r, *_check_pair(pair))
    if kernel.singular:
        keep &= r > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        M = np.asarray(kernel.components[j](X[:, None, :], Y[None, :, :]), dtype=float)
    M = np.broadcast_to(M, r.shape)
    return np.where(keep, M, 0.0)


@dataclass(frozen=True)
class TruncationLadder:
    """Finite family of truncation pairs (delta, R) standing in for
    0 < delta < R < infinity."""

    pairs: tuple

    def __post_init__(self):
        pairs = tuple(sorted(_check_pair(p) for p in self.pairs))
        if not pairs:
            raise ValueError("truncation ladder is empty")
        object.__setattr__(self, "pairs", pairs)

    def __iter__(self):
        return iter(self.pairs)

    def __len__(self):
        return len(self.pairs)

    @classmethod
    def single(cls, delta: float, R: float) -> "TruncationLadder":
        return cls(((delta, R),))

    @classmethod
    def dyadic(cls, cell_width: float, diameter: float, inner=None, outer=None):
        """Pairs on dyadic scales of the cell width.

        ``inner`` lists the delta multipliers (default: every power of two
        below the diameter); ``outer`` the R multipliers (default: powers of
        two from 2 up to the first one exceeding the diameter).
        """
        if inner is None:
            inner, k = [], 1
            while k * cell_width < diameter:
                inner.append(k)
                k *= 2
        if outer is None:
            outer, k = [], 2
            while True:
                outer.append(k)
                if k * cell_width > diameter:
                    break
                k *= 2
        pairs = [(a * cell_width, b * cell_width) for a in inner for b in outer if a < b]
        return cls(tuple(pairs))

    def breakpoints(self) -> np.ndarray:
        return np.unique(np.asarray(self.pairs).ravel())

    def check_grid(self, cell_width: float, kernel: KernelSpec | None = None):
        """Reject inner cutoffs below one cell (allowed for bounded kernels)."""
        if kernel is not None and not kernel.singular:
            return self
        lo = min(d for d, _ in self.pairs)
        if lo < cell_width * (1 - _EDGE):
            raise ValueError(
                f"smallest truncation delta={lo} is below the cell width {cell_width}")
        return self

    def __contains__(self, pair):
        return tuple(map(float, pair)) in self.pairs


# --- size / smoothness / ellipticity checks ---------------------------------------

@dataclass(frozen=True)
class CZReport:
    """Largest observed constants in the size and smoothness inequalities,
    for the kernel and its adjoint.  ``gradient`` is a finite-difference
    diagnostic of |grad_x K| |x - y|^(n + 1 - alpha)."""

    size: float
    smoothness: float
    adjoint_size: float
    adjoint_smoothness: float
    gradient: float
    c_cz: float
    samples: int

    @property
    def measured(self) -> float:
        return max(self.size, self.smoothness, self.adjoint_size, self.adjoint_smoothness)

    @property
    def size_ok(self) -> bool:
        return max(self.size, self.adjoint_size) <= self.c_cz * (1 + 1e-12)

    @property
    def smoothness_ok(self) -> bool:
        return max(self.smoothness, self.adjoint_smoothness) <= self.c_cz * (1 + 1e-12)

    @property
    def passed(self) -> bool:
        return self.size_ok and self.smoothness_ok


def _unit_vectors(rng, count, n):
    u = rng.normal(size=(count, n))
    return u / np.linalg.norm(u, axis=1, keepdims=True)


def validate_cz_bounds(kernel: KernelSpec, sample_count: int, seed: int = 0,
                       box: float = 1.0) -> CZReport:
    """Sample triples (x, x', y) with |x - x'| <= |x - y| / 2 and measure the
    constants in the size and Hoelder smoothness bounds."""
    if sample_count < 1:
        raise ValueError("sample_count must be >= 1")
    rng = np.random.default_rng(seed)
    n, a, dl = kernel.n, kernel.alpha, kernel.delta
    x = rng.uniform(-box, box, size=(sample_count, n))
    y = rng.uniform(-box, box, size=(sample_count, n))
    r = np.linalg.norm(x - y, axis=1)
    ok = r > 0
    x, y, r = x[ok], y[ok], r[ok]
    t = rng.uniform(0.0, 0.5, size=len(r))
    t[0] = 0.5  # include the extreme admissible ratio
    xp = x + (t * r)[:, None] * _unit_vectors(rng, len(r), n)
    ratio = np.linalg.norm(x - xp, axis=1) / r
    scale = r ** (a - n)
    h = 1e-6 * r
    out = dict(size=0.0, smoothness=0.0, adjoint_size=0.0, adjoint_smoothness=0.0,
               gradient=0.0)
    for k in kernel.components:
        kxy, kxpy = k(x, y), k(xp, y)
        kyx, kyxp = k(y, x), k(y, xp)
        out["size"] = max(out["size"], float(np.max(np.abs(kxy) / scale)))
        out["adjoint_size"] = max(out["adjoint_size"], float(np.max(np.abs(kyx) / scale)))
        good = ratio > 0
        den = ratio[good] ** dl * scale[good]
        out["smoothness"] = max(out["smoothness"], float(np.max(
            np.abs(kxy - kxpy)[good] / den, initial=0.0)))
        out["adjoint_smoothness"] = max(out["adjoint_smoothness"], float(np.max(
            np.abs(kyx - kyxp)[good] / den, initial=0.0)))
        grad = np.zeros(len(r))
        for i in range(n):
            e = np.zeros(n)
            e[i] = 1.0
            g = (k(x + h[:, None] * e, y) - k(x - h[:, None] * e, y)) / (2 * h)
            grad += g * g
        out["gradient"] = max(out["gradient"],
                              float(np.max(np.sqrt(grad) * r ** (n + 1 - a))))
    return CZReport(c_cz=kernel.c_cz, samples=int(len(r)), **out)


@dataclass(frozen=True)
class EllipticityReport:
    c_ell: float
    worst_direction: np.ndarray
    samples: int


def _directions(direction_samples, n):
    if np.isscalar(direction_samples):
        m = int(direction_samples)
        if m < 1:
            raise ValueError("need at least one direction")
        if n == 1:
            return np.array([[1.0], [-1.0]])
        if n == 2:
            th = 2 * np.pi * np.arange(m) / m
            return np.stack([np.cos(th), np.sin(th)], axis=1)
        return _unit_vectors(np.random.default_rng(0), m, n)
    u = np.asarray(direction_samples, dtype=float).reshape(-1, n)
    return u / np.linalg.norm(u, axis=1, keepdims=True)


def ellipticity(kernel: KernelSpec, t_ladder, direction_samples, x=None) -> EllipticityReport:
    """min over directions u of max over components j of
    min over t of |K_j(x, x + t u)| t^(n - alpha)."""
    t = np.asarray(t_ladder, dtype=float).ravel()
    if t.size == 0 or np.any(t <= 0):
        raise ValueError("t_ladder must be nonempty and positive")
    n, a = kernel.n, kernel.alpha
    u = _directions(direction_samples, n)
    x = np.zeros(n) if x is None else _point(x, n)
    pts = x + t[None, :, None] * u[:, None, :]          # (dirs, t, n)
    per_comp = []
    for k in kernel.components:
        vals = np.abs(k(np.broadcast_to(x, pts.shape), pts)) * t[None, :] ** (n - a)
        per_comp.append(vals.min(axis=1))
    best = np.max(np.stack(per_comp), axis=0)           # per direction
    i = int(np.argmin(best))
    return EllipticityReport(float(best[i]), u[i], len(u))
