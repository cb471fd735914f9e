"""Per-cube kernel matrices, shared between the cube-indexed searches."""
from __future__ import annotations

import numpy as np

from .geometry import cell_index_ranges
from .kernels import KernelSpec, kernel_block


def _ravel(ranges, k, n):
    axes = [np.arange(s, e) for s, e in ranges]
    if any(len(a) == 0 for a in axes):
        return np.empty(0, dtype=int)
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.ravel_multi_index([m.ravel() for m in mesh], (k,) * n)


class CubeBlocks:
    """Cells of a cube and the truncated kernel matrix restricted to them.

    For translation-invariant kernels the matrix of a cube depends only on
    how many cells it spans per axis, so cubes of one level share a block.
    """

    def __init__(self, kernel: KernelSpec, grid):
        self.kernel = kernel
        self.grid = grid
        self._cache = {}

    def cells(self, Q):
        ranges = cell_index_ranges(self.grid.root, self.grid.resolution, Q)
        return ranges, _ravel(ranges, self.grid.cells_per_side, self.grid.n)

    def block(self, j, Q, pair):
        ranges, idx = self.cells(Q)
        if self.kernel.translation_invariant:
            key = (j, pair, tuple(e - s for s, e in ranges))
        else:
            key = (j, pair, ranges)
        M = self._cache.get(key)
        if M is None:
            pts = self.grid.centers[idx]
            M = kernel_block(self.kernel, j, pts, pts, pair)
            M.setflags(write=False)
            self._cache[key] = M
        return idx, M
