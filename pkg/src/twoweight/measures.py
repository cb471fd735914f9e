"""Cell-atomic measures on a uniform grid, with doubling and A-infinity
diagnostics and a flat text serialization."""
from __future__ import annotations

import zlib
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .exceptions import DegenerateMeasureError, MisalignedGridError
from .geometry import (Cube, CubeFamily, cell_index_ranges, cell_indices,
                       enumerate_cubes)

# Candidate A-infinity exponents scanned by a_infinity_report.
EPSILON_GRID = tuple(np.round(np.arange(0.05, 0.951, 0.05), 2))


class _GridData:
    """Shared grid bookkeeping for measures and sampled functions.

    Subclasses set ``root``, ``resolution`` and a data array of shape
    ``(2**L,) * n`` whose row-major flattening follows ``cell_partition``.
    """

    root: Cube
    resolution: int

    @property
    def n(self) -> int:
        return self.root.n

    @property
    def cells_per_side(self) -> int:
        return 2 ** self.resolution

    @property
    def shape(self) -> tuple:
        return (self.cells_per_side,) * self.n

    @property
    def n_cells(self) -> int:
        return self.cells_per_side ** self.n

    @property
    def cell_width(self) -> float:
        return self.root.side / self.cells_per_side

    @property
    def cell_volume(self) -> float:
        return self.cell_width ** self.n

    @cached_property
    def centers(self) -> np.ndarray:
        """Cell centers as an ``(n_cells, n)`` array in row-major order."""
        w = self.cell_width
        axes = [self.root.lower[i] + (np.arange(self.cells_per_side) + 0.5) * w
                for i in range(self.n)]
        mesh = np.meshgrid(*axes, indexing="ij")
        c = np.stack([m.ravel() for m in mesh], axis=-1)
        c.setflags(write=False)
        return c

    def cells_in(self, Q: Cube) -> np.ndarray:
        """Flat indices of cells whose centers lie in ``Q``."""
        return cell_indices(self.root, self.resolution, Q)

    def same_grid(self, other) -> bool:
        return (self.resolution == other.resolution
                and self.root == other.root)

    def check_aligned(self, *others):
        for o in others:
            if not self.same_grid(o):
                raise MisalignedGridError(
                    f"grids differ: {self.root.describe()} L={self.resolution} vs "
                    f"{o.root.describe()} L={o.resolution}")


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class GridMeasure(_GridData):
    """Nonnegative measure carried by the cells of a uniform grid over ``root``.

    ``masses`` holds one mass per cell (not a density); a flat sequence is
    reshaped row-major.
    """

    root: Cube
    resolution: int
    masses: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.resolution < 0:
            raise ValueError("resolution must be >= 0")
        m = np.asarray(self.masses, dtype=float)
        if m.size != self.n_cells:
            raise ValueError(f"expected {self.n_cells} masses, got {m.size}")
        if not np.all(np.isfinite(m)):
            raise ValueError("masses must be finite")
        if np.any(m < 0):
            raise ValueError("masses must be nonnegative")
        object.__setattr__(self, "masses", _frozen(m.reshape(self.shape)))

    @property
    def flat(self) -> np.ndarray:
        return self.masses.reshape(-1)

    def total(self) -> float:
        return float(self.flat.sum())

    def cube_mass(self, Q: Cube) -> float:
        return cube_mass(self, Q)

    def mass_of(self, cells) -> float:
        """Mass of a union of cells given by flat indices or a boolean mask."""
        return float(self.flat[np.asarray(cells)].sum())

    def scaled(self, c: float) -> "GridMeasure":
        if c < 0:
            raise ValueError("scale factor must be nonnegative")
        return GridMeasure(self.root, self.resolution, self.masses * c)

    def density(self) -> np.ndarray:
        """Mass per unit volume on each cell (flat)."""
        return self.flat / self.cell_volume

    @classmethod
    def lebesgue(cls, root: Cube, resolution: int) -> "GridMeasure":
        k = 2 ** resolution
        w = root.side / k
        return cls(root, resolution, np.full((k,) * root.n, w ** root.n))

    @classmethod
    def zeros(cls, root: Cube, resolution: int) -> "GridMeasure":
        return cls(root, resolution, np.zeros((2 ** resolution,) * root.n))


def cube_mass(mu: GridMeasure, Q: Cube) -> float:
    """|Q|_mu: total mass of cells whose centers lie in Q.

    Parts of Q outside the root carry no mass, which amounts to clipping.
    """
    ranges = cell_index_ranges(mu.root, mu.resolution, Q)
    return float(mu.masses[tuple(slice(s, e) for s, e in ranges)].sum())


def from_density(f, root: Cube, resolution: int) -> GridMeasure:
    """Midpoint-rule discretization: mass = f(center) * cell volume.

    ``f`` is called once on the ``(n_cells, n)`` array of cell centers and
    must return one value per center.
    """
    grid = GridMeasure.zeros(root, resolution)
    vals = np.asarray(f(grid.centers), dtype=float).reshape(-1)
    if vals.size == 1 and grid.n_cells > 1:
        vals = np.full(grid.n_cells, float(vals[0]))
    if vals.size != grid.n_cells:
        raise ValueError("density returned the wrong number of values")
    if not np.all(np.isfinite(vals)):
        raise ValueError("density is not finite at every cell center")
    if np.any(vals < 0):
        raise ValueError("density is negative at some cell center")
    return GridMeasure(root, resolution, vals * grid.cell_volume)


@dataclass(frozen=True)
class DoublingStats:
    c_doub: float
    theta: float
    witness: Cube
    n_tested: int


def doubling_stats(mu: GridMeasure, family: CubeFamily) -> DoublingStats:
    """Largest observed ratio |2Q|_mu / |Q|_mu over the family.

    Only cubes with positive mass whose double still lies in the measure's
    root are tested.
    """
    best, witness, tested = -np.inf, None, 0
    for Q in enumerate_cubes(family):
        Q2 = Q.dilate(2.0)
        if not mu.root.contains(Q2):
            continue
        m = cube_mass(mu, Q)
        if m <= 0:
            continue
        tested += 1
        r = cube_mass(mu, Q2) / m
        if r > best:
            best, witness = r, Q
    if witness is None:
        raise DegenerateMeasureError(
            "degenerate measure: no cube with positive mass whose double fits in the root")
    return DoublingStats(best, float(np.log2(best)), witness, tested)


@dataclass(frozen=True)
class AInfinityReport:
    """Fitted (epsilon, C) with |E|_w/|Q|_w <= C (|E|/|Q|)^epsilon on every
    probed pair.  ``curve`` maps each candidate epsilon to its fitted C."""

    epsilon: float
    c_reform: float
    worst_cube: Cube
    worst_cells: np.ndarray = field(repr=False)
    worst_kind: str = ""
    curve: dict = field(default_factory=dict, repr=False)

    @property
    def worst_pair(self):
        return (self.worst_kind, self.worst_cube)


def stream(seed: int, task: str, index: int = 0) -> np.random.Generator:
    """Reproducible random stream for (task, index) derived from a master seed."""
    return np.random.default_rng(
        np.random.SeedSequence([int(seed), zlib.crc32(task.encode()), int(index)]))


def _a_inf_candidates(omega, lebesgue, Q, n_random, rng):
    """Yield (kind, cells, omega ratio, lebesgue ratio) arrays for cube Q."""
    idx = omega.cells_in(Q)
    w = omega.flat[idx]
    lb = lebesgue.flat[idx]
    wq, lq = w.sum(), lb.sum()
    if wq <= 0 or lq <= 0:
        return None
    dens = np.divide(w, lb, out=np.zeros_like(w), where=lb > 0)
    order = np.argsort(-dens, kind="stable")
    rw = np.cumsum(w[order]) / wq
    rl = np.cumsum(lb[order]) / lq
    sets = [("superlevel", idx[order[:k + 1]]) for k in range(len(idx))]
    ratios_w, ratios_l = list(rw), list(rl)
    for t in range(n_random):
        mask = rng.random(len(idx)) < 0.5
        if not mask.any():
            mask[rng.integers(len(idx))] = True
        sets.append((f"random#{t}", idx[mask]))
        ratios_w.append(w[mask].sum() / wq)
        ratios_l.append(lb[mask].sum() / lq)
    return sets, np.asarray(ratios_w), np.asarray(ratios_l)


def a_infinity_report(omega: GridMeasure, lebesgue: GridMeasure, family: CubeFamily,
                      n_random_sets: int = 0, seed: int = 0,
                      epsilons=EPSILON_GRID) -> AInfinityReport:
    """Fit the A-infinity reformulation constant for each candidate exponent.

    For every cube in the family the candidate sets E are the superlevel
    sets of the density of omega (these maximize |E|_omega at fixed |E|) plus
    ``n_random_sets`` random cell unions.  The reported pair is the one with
    the smallest constant, ties going to the larger exponent.
    """
    omega.check_aligned(lebesgue)
    eps = np.asarray(epsilons, dtype=float)
    best_c = np.full(eps.shape, -np.inf)
    best_at = [None] * len(eps)
    for qi, Q in enumerate(enumerate_cubes(family)):
        cand = _a_inf_candidates(omega, lebesgue, Q, n_random_sets,
                                 stream(seed, "a_infinity", qi))
        if cand is None:
            continue
        sets, rw, rl = cand
        # ratio[e, k] = rw_k / rl_k ** eps_e
        ratio = rw[None, :] / rl[None, :] ** eps[:, None]
        k = np.argmax(ratio, axis=1)
        vals = ratio[np.arange(len(eps)), k]
        for e in np.nonzero(vals > best_c)[0]:
            best_c[e] = vals[e]
            best_at[e] = (Q, sets[k[e]])
    if best_at[0] is None:
        raise DegenerateMeasureError("degenerate measure: |Q|_omega = 0 for every cube")
    # smallest constant, ties (to round-off) broken towards larger epsilon
    cmin = best_c.min()
    choice = max(e for e in range(len(eps)) if best_c[e] <= cmin * (1 + 1e-12))
    Q, (kind, cells) = best_at[choice]
    return AInfinityReport(float(eps[choice]), float(best_c[choice]), Q,
                           np.asarray(cells), kind,
                           {float(e): float(c) for e, c in zip(eps, best_c)})


# --- flat text serialization -------------------------------------------------

def _format_header(obj) -> list:
    c = " ".join(repr(float(v)) for v in obj.root.center)
    return [f"n {obj.n}", f"center {c}", f"side {obj.root.side!r}",
            f"L {obj.resolution}"]


def dumps_grid(obj, values) -> str:
    lines = _format_header(obj)
    lines.extend(repr(float(v)) for v in np.asarray(values).reshape(-1))
    return "\n".join(lines) + "\n"


def loads_grid(text: str):
    """Parse the flat format into ``(root, resolution, values)``."""
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    header = {}
    for ln in lines[:4]:
        key, _, rest = ln.partition(" ")
        header[key] = rest.split()
    try:
        n = int(header["n"][0])
        center = tuple(float(v) for v in header["center"])
        side = float(header["side"][0])
        L = int(header["L"][0])
    except (KeyError, IndexError, ValueError) as exc:
        raise ValueError(f"malformed grid header: {exc}") from None
    if len(center) != n:
        raise ValueError("center dimension does not match n")
    values = np.array([float(v) for v in lines[4:]])
    return Cube(center, side), L, values


def save_measure(mu: GridMeasure, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps_grid(mu, mu.flat))


def load_measure(path) -> GridMeasure:
    with open(path, encoding="utf-8") as fh:
        root, L, values = loads_grid(fh.read())
    return GridMeasure(root, L, values)
