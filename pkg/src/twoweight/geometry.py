"""Axis-parallel cubes, dyadic partitions and shifted dyadic families.

All suprema "over all cubes" in the package are taken over a finite
:class:`CubeFamily`: the dyadic subcubes of a root cube down to some level,
together with the dyadic grids translated by half a side length in any
subset of the coordinate directions.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

# Relative tolerance used when snapping cube faces onto the cell grid.
_SNAP = 1e-9


@dataclass(frozen=True)
class Cube:
    """Closed axis-parallel cube given by its center and side length."""

    center: tuple
    side: float

    def __post_init__(self):
        center = tuple(float(c) for c in np.atleast_1d(self.center))
        if not center:
            raise ValueError("cube needs at least one coordinate")
        if not np.all(np.isfinite(center)):
            raise ValueError(f"non-finite cube center {center}")
        if not (self.side > 0 and np.isfinite(self.side)):
            raise ValueError(f"cube side must be positive, got {self.side}")
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "side", float(self.side))

    @classmethod
    def from_bounds(cls, lower, side):
        lower = np.atleast_1d(np.asarray(lower, dtype=float))
        return cls(tuple(lower + side / 2.0), side)

    @property
    def n(self) -> int:
        return len(self.center)

    @property
    def lower(self) -> np.ndarray:
        return np.asarray(self.center) - self.side / 2.0

    @property
    def upper(self) -> np.ndarray:
        return np.asarray(self.center) + self.side / 2.0

    def volume(self) -> float:
        return self.side ** self.n

    def diameter(self) -> float:
        return self.side * np.sqrt(self.n)

    def contains_point(self, x) -> bool:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return bool(np.all(x >= self.lower) and np.all(x <= self.upper))

    def contains(self, other: "Cube", rtol: float = _SNAP) -> bool:
        """Whether ``other`` lies inside this (closed) cube, up to round-off."""
        tol = rtol * self.side
        return bool(np.all(other.lower >= self.lower - tol)
                    and np.all(other.upper <= self.upper + tol))

    def dilate(self, factor: float) -> "Cube":
        return dilate(self, factor)

    def describe(self) -> str:
        c = " ".join(f"{v:.17g}" for v in self.center)
        return f"cube(center=[{c}] side={self.side:.17g})"


def dilate(Q: Cube, factor: float) -> Cube:
    """Concentric cube with side multiplied by ``factor``."""
    if not factor > 0:
        raise ValueError(f"dilation factor must be positive, got {factor}")
    return Cube(Q.center, Q.side * factor)


def cell_partition(Q: Cube, resolution: int) -> list:
    """The ``2**(resolution*n)`` congruent cells tiling ``Q``, row-major
    (first coordinate slowest)."""
    if resolution < 0:
        raise ValueError("resolution must be >= 0")
    k = 2 ** resolution
    w = Q.side / k
    lo = Q.lower
    return [Cube(tuple(lo + (np.asarray(idx) + 0.5) * w), w)
            for idx in np.ndindex(*(k,) * Q.n)]


def all_shifts(n: int) -> tuple:
    """Every 0/1 shift vector in ``n`` dimensions, unshifted first."""
    return tuple(itertools.product((0, 1), repeat=n))


@dataclass(frozen=True)
class CubeFamily:
    """Dyadic subcubes of ``root`` at levels ``0..max_level`` for each shift.

    A shift vector has 0/1 entries; coordinate ``i`` of the level-``k`` grid
    is translated by ``shift[i] * side_k / 2``.  Translated cubes that poke
    out of the root are dropped, so every member lies inside the root.
    """

    root: Cube
    max_level: int
    shifts: tuple = None

    def __post_init__(self):
        if self.max_level < 0:
            raise ValueError("max_level must be >= 0")
        shifts = self.shifts
        if shifts is None:
            shifts = all_shifts(self.root.n)
        shifts = tuple(tuple(int(s) for s in v) for v in shifts)
        for v in shifts:
            if len(v) != self.root.n or any(s not in (0, 1) for s in v):
                raise ValueError(f"bad shift vector {v}")
        if not shifts:
            raise ValueError("need at least one shift vector")
        object.__setattr__(self, "shifts", shifts)

    @classmethod
    def dyadic(cls, root: Cube, max_level: int) -> "CubeFamily":
        """The single unshifted dyadic grid."""
        return cls(root, max_level, ((0,) * root.n,))

    @property
    def shifted(self) -> bool:
        return len(self.shifts) > 1

    def expected_size(self) -> int:
        """Closed-form member count (after dropping cubes outside the root)."""
        total = 0
        for level in range(self.max_level + 1):
            k = 2 ** level
            for v in self.shifts:
                total += int(np.prod([k - s for s in v]))
        return total

    def __iter__(self):
        return iter(enumerate_cubes(self))

    def __len__(self):
        return self.expected_size()


def enumerate_cubes(family: CubeFamily) -> list:
    """Deterministically list the cubes of ``family``.

    Ordered by level, then shift vector, then row-major position.  The root
    is always the first entry.
    """
    root = family.root
    lo = root.lower
    out = []
    for level in range(family.max_level + 1):
        k = 2 ** level
        side = root.side / k
        for v in family.shifts:
            shift = np.asarray(v, dtype=float) * 0.5
            ranges = [range(k - s) for s in v]
            for idx in itertools.product(*ranges):
                center = lo + (np.asarray(idx, dtype=float) + 0.5 + shift) * side
                out.append(Cube(tuple(center), side))
    return out


def _snap(u: np.ndarray) -> np.ndarray:
    r = np.round(2.0 * u) / 2.0
    return np.where(np.abs(u - r) <= _SNAP * np.maximum(1.0, np.abs(u)), r, u)


def cell_index_ranges(root: Cube, resolution: int, Q: Cube) -> tuple:
    """Per-axis half-open index ranges of grid cells whose centers lie in Q.

    Membership is by cell center with the rule ``lo < c <= hi`` along every
    axis, so a center sitting on a shared face goes to the lower-index cube
    and masses of face-adjacent cubes add up exactly.  Centers are never on
    the root's own faces, so the root still behaves as a closed cube.
    """
    k = 2 ** resolution
    w = root.side / k
    a = _snap((Q.lower - root.lower) / w)
    b = _snap((Q.upper - root.lower) / w)
    start = np.floor(a - 0.5).astype(int) + 1
    stop = np.floor(b - 0.5).astype(int) + 1
    start = np.clip(start, 0, k)
    stop = np.clip(stop, 0, k)
    stop = np.maximum(stop, start)
    return tuple(zip(start.tolist(), stop.tolist()))


def cell_slices(root: Cube, resolution: int, Q: Cube) -> tuple:
    return tuple(slice(s, e) for s, e in cell_index_ranges(root, resolution, Q))


def cell_indices(root: Cube, resolution: int, Q: Cube) -> np.ndarray:
    """Flat (row-major) indices of the grid cells whose centers lie in Q."""
    k = 2 ** resolution
    ranges = cell_index_ranges(root, resolution, Q)
    axes = [np.arange(s, e) for s, e in ranges]
    if any(len(a) == 0 for a in axes):
        return np.empty(0, dtype=int)
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.ravel_multi_index([m.ravel() for m in mesh], (k,) * root.n)


def cell_of_point(root: Cube, resolution: int, x) -> int:
    """Flat index of the cell containing point ``x`` (same face rule)."""
    k = 2 ** resolution
    w = root.side / k
    u = _snap((np.atleast_1d(np.asarray(x, dtype=float)) - root.lower) / w)
    idx = np.clip(np.ceil(u).astype(int) - 1, 0, k - 1)
    return int(np.ravel_multi_index(tuple(idx), (k,) * root.n))


def as_cube_list(cubes) -> list:
    """Cubes of a :class:`CubeFamily`, or an explicit sequence of cubes."""
    if isinstance(cubes, CubeFamily):
        return enumerate_cubes(cubes)
    out = list(cubes)
    if not all(isinstance(Q, Cube) for Q in out):
        raise TypeError("expected a CubeFamily or a sequence of Cube objects")
    return out
