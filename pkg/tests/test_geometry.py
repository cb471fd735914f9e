import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from twoweight.geometry import (Cube, CubeFamily, all_shifts, cell_index_ranges,
                                cell_indices, cell_partition, dilate, enumerate_cubes)


def bounds(Q):
    return tuple(np.round(Q.lower, 12)), tuple(np.round(Q.upper, 12))


class TestCube:
    def test_volume_and_center(self):
        Q = Cube((1.0, 2.0), 0.5)
        assert Q.volume() == 0.25
        assert Q.n == 2
        assert Q.center == (1.0, 2.0)

    def test_rejects_bad_side(self):
        with pytest.raises(ValueError):
            Cube((0.0,), 0.0)
        with pytest.raises(ValueError):
            Cube((0.0,), -1.0)

    def test_from_bounds(self):
        Q = Cube.from_bounds([0.0], 1.0)
        assert Q.center == (0.5,)


class TestEnumerate:
    def test_dyadic_split_of_interval(self):
        fam = CubeFamily.dyadic(Cube((0.5,), 1.0), 1)
        got = [bounds(Q) for Q in enumerate_cubes(fam)]
        assert got == [((0.0,), (1.0,)), ((0.0,), (0.5,)), ((0.5,), (1.0,))]

    def test_level_zero_square(self):
        root = Cube((0.5, 0.5), 1.0)
        assert enumerate_cubes(CubeFamily(root, 0)) == [root]

    def test_shifted_count_matches_brute_force(self):
        # Oracle: every candidate [lo, lo + side] with lo on the half-side
        # lattice of each level, kept when it fits in the root.
        root = Cube((0.5,), 1.0)
        fam = CubeFamily(root, 2)
        expected = set()
        for level in range(3):
            side = 1.0 / 2 ** level
            for m in range(-4, 2 ** (level + 1) + 4):
                lo = m * side / 2
                if lo >= -1e-12 and lo + side <= 1 + 1e-12:
                    expected.add((round(lo, 12), round(lo + side, 12)))
        got = {(b[0][0], b[1][0]) for b in map(bounds, enumerate_cubes(fam))}
        assert got == expected
        assert len(enumerate_cubes(fam)) == fam.expected_size() == len(expected)

    def test_deterministic_and_inside_root(self):
        root = Cube((0.0, 0.0), 2.0)
        fam = CubeFamily(root, 3)
        a, b = enumerate_cubes(fam), enumerate_cubes(fam)
        assert a == b
        assert a[0] == root
        assert all(root.contains(Q) for Q in a)

    def test_shift_vectors(self):
        assert all_shifts(2) == ((0, 0), (0, 1), (1, 0), (1, 1))
        with pytest.raises(ValueError):
            CubeFamily(Cube((0.0,), 1.0), 1, ((2,),))

    def test_nesting(self):
        root = Cube((0.0, 0.0), 1.0)
        fam = CubeFamily.dyadic(root, 3)
        cubes = enumerate_cubes(fam)
        for level in range(3):
            parents = [Q for Q in cubes if np.isclose(Q.side, 2.0 ** -level)]
            kids = [Q for Q in cubes if np.isclose(Q.side, 2.0 ** -(level + 1))]
            for K in kids:
                assert sum(P.contains(K) for P in parents) == 1


class TestDilate:
    def test_doubling_interval(self):
        D = dilate(Cube((0.5,), 1.0), 2)
        assert bounds(D) == ((-0.5,), (1.5,))

    def test_identity(self):
        Q = Cube((0.3, -0.2), 0.7)
        assert dilate(Q, 1) == Q

    @given(st.floats(0.01, 100.0))
    def test_inverse_pair(self, beta):
        Q = Cube((0.3,), 0.7)
        back = dilate(dilate(Q, beta), 1 / beta)
        assert abs(back.side - Q.side) <= 1e-12 * Q.side
        assert back.center == Q.center

    def test_contains_and_concentric(self):
        Q = Cube((0.1, 0.2), 0.3)
        D = dilate(Q, 2)
        assert D.contains(Q) and D.center == Q.center

    @pytest.mark.parametrize("factor", [0, -1])
    def test_rejects_nonpositive(self, factor):
        with pytest.raises(ValueError):
            dilate(Cube((0.0,), 1.0), factor)


class TestPartition:
    def test_interval(self):
        cells = cell_partition(Cube((0.5,), 1.0), 1)
        assert [bounds(c) for c in cells] == [((0.0,), (0.5,)), ((0.5,), (1.0,))]

    def test_square_has_four_cells_row_major(self):
        cells = cell_partition(Cube((0.5, 0.5), 1.0), 1)
        assert len(cells) == 4
        assert [c.center for c in cells] == [(0.25, 0.25), (0.25, 0.75),
                                             (0.75, 0.25), (0.75, 0.75)]

    @pytest.mark.parametrize("n,L", [(1, 12), (2, 6), (1, 0)])
    def test_volumes_sum(self, n, L):
        Q = Cube((0.3,) * n, 1.7)
        total = sum(c.volume() for c in cell_partition(Q, L))
        assert abs(total - Q.volume()) <= 1e-12 * Q.volume()


class TestCellMembership:
    def test_face_center_goes_to_lower_cube(self):
        # Cells of width 1/4 on [0, 1]; cube [0, 0.375] has a face on a cell center.
        root = Cube((0.5,), 1.0)
        left = Cube.from_bounds([0.0], 0.375)
        right = Cube.from_bounds([0.375], 0.375)
        a, b = cell_indices(root, 2, left), cell_indices(root, 2, right)
        assert set(a).isdisjoint(b)
        assert list(a) == [0, 1]

    @settings(max_examples=50)
    @given(st.integers(0, 3), st.integers(0, 7), st.integers(0, 1))
    def test_family_cells_match_center_rule(self, level, i, s):
        root = Cube((0.0,), 2.0)
        L = 5
        k = 2 ** level
        if i >= k - s:
            return
        side = 2.0 / k
        Q = Cube.from_bounds([-1.0 + (i + 0.5 * s) * side], side)
        centers = np.array([c.center[0] for c in cell_partition(root, L)])
        lo, hi = Q.lower[0], Q.upper[0]
        expected = np.nonzero((centers > lo + 1e-12) & (centers <= hi + 1e-12))[0]
        assert list(cell_indices(root, L, Q)) == list(expected)
        (start, stop), = cell_index_ranges(root, L, Q)
        assert stop - start == len(expected)

    def test_2d_indices_tile_root(self):
        root = Cube((0.0, 0.0), 1.0)
        quads = [Q for Q in enumerate_cubes(CubeFamily.dyadic(root, 1)) if Q.side == 0.5]
        cells = np.concatenate([cell_indices(root, 3, Q) for Q in quads])
        assert sorted(cells) == list(range(64))

    def test_itertools_product_matches_count(self):
        fam = CubeFamily(Cube((0.0, 0.0), 1.0), 2)
        assert len(enumerate_cubes(fam)) == sum(
            np.prod([2 ** k - s for s in v])
            for k in range(3) for v in itertools.product((0, 1), repeat=2))
