import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from twoweight.exceptions import MisalignedGridError
from twoweight.geometry import Cube, CubeFamily
from twoweight.kernels import TruncationLadder, constant, fractional, hilbert
from twoweight.measures import GridMeasure
from twoweight.operators import (GridFunction, apply_truncated, dyadic_maximal,
                                 fractional_integral, fractional_integral_grid,
                                 fractional_maximal, maximal_truncation)

UNIT = Cube((0.5,), 1.0)
SYM = Cube((0.0,), 2.0)


def rand_pair(seed, root=UNIT, L=5):
    rng = np.random.default_rng(seed)
    sigma = GridMeasure(root, L, rng.exponential(size=(2 ** L) ** root.n))
    f = GridFunction.like(sigma, rng.normal(size=(2 ** L) ** root.n))
    return sigma, f


class TestApplyTruncated:
    def test_constant_kernel_counts_all_but_own_cell(self):
        sigma, _ = rand_pair(0)
        one = GridFunction.constant(sigma)
        out = apply_truncated(constant(1), 0, one, sigma, (sigma.cell_width, 4.0))
        assert np.allclose(out.flat, sigma.total() - sigma.flat, rtol=1e-13)

    def test_zero_function(self):
        sigma, _ = rand_pair(1)
        out = apply_truncated(hilbert(), 0, GridFunction.constant(sigma, 0.0), sigma,
                              (sigma.cell_width, 2.0))
        assert not out.flat.any()

    def test_hilbert_antisymmetric_about_midpoint(self):
        L = 8
        sigma = GridMeasure.lebesgue(UNIT, L)
        out = apply_truncated(hilbert(), 0, GridFunction.constant(sigma), sigma,
                              (2.0 ** -L, 2.0)).flat
        assert np.max(np.abs(out + out[::-1])) <= 1e-9

    def test_direct_double_sum(self):
        sigma, f = rand_pair(2, L=4)
        pair = (sigma.cell_width, 0.5)
        c = sigma.centers[:, 0]
        want = np.zeros(16)
        for i in range(16):
            for k in range(16):
                r = abs(c[i] - c[k])
                if pair[0] - 1e-12 <= r < pair[1]:
                    want[i] += f.flat[k] * sigma.flat[k] / (c[i] - c[k])
        got = apply_truncated(hilbert(), 0, f, sigma, pair).flat
        assert np.allclose(got, want, rtol=1e-12, atol=1e-12)

    @settings(max_examples=25)
    @given(st.integers(0, 2 ** 31), st.floats(-3, 3), st.floats(0.1, 5))
    def test_linear_in_f_and_sigma(self, seed, a, c):
        sigma, f = rand_pair(seed)
        _, g = rand_pair(seed + 1)
        pair = (sigma.cell_width, 1.0)
        T = lambda h, s: apply_truncated(hilbert(), 0, h, s, pair).flat
        comb = GridFunction.like(sigma, a * f.flat + g.flat)
        assert np.allclose(T(comb, sigma), a * T(f, sigma) + T(g, sigma), atol=1e-9)
        assert np.allclose(T(f, sigma.scaled(c)), c * T(f, sigma), rtol=1e-12, atol=1e-12)

    def test_misaligned(self):
        sigma, _ = rand_pair(3, L=4)
        with pytest.raises(MisalignedGridError):
            apply_truncated(hilbert(), 0, GridFunction.constant(GridMeasure.lebesgue(UNIT, 5)),
                            sigma, (1 / 16, 1.0))


class TestMaximalTruncation:
    def test_single_pair(self):
        sigma, f = rand_pair(4)
        pair = (sigma.cell_width, 0.5)
        got = maximal_truncation(hilbert(), f, sigma, TruncationLadder.single(*pair)).flat
        assert np.array_equal(got, np.abs(apply_truncated(hilbert(), 0, f, sigma, pair).flat))

    def test_zero(self):
        sigma, _ = rand_pair(5)
        lad = TruncationLadder.dyadic(sigma.cell_width, 1.0)
        assert not maximal_truncation(hilbert(), GridFunction.constant(sigma, 0.0), sigma,
                                      lad).flat.any()

    def test_nested_ladders(self):
        sigma, f = rand_pair(6)
        big = TruncationLadder.dyadic(sigma.cell_width, 1.0)
        small = TruncationLadder(big.pairs[::3])
        a = maximal_truncation(hilbert(), f, sigma, small).flat
        b = maximal_truncation(hilbert(), f, sigma, big).flat
        assert np.all(b >= a - 1e-13)

    def test_dominated_by_fractional_integral(self):
        L = 7
        sigma, f = rand_pair(7, SYM, L)
        K = fractional(0.5, 1)
        lad = TruncationLadder.dyadic(sigma.cell_width, SYM.diameter())
        nu = GridMeasure(SYM, L, np.abs(f.flat) * sigma.flat)
        lhs = maximal_truncation(K, f, sigma, lad).flat
        rhs = K.c_cz * fractional_integral_grid(nu, 0.5).flat
        assert np.all(lhs <= rhs * (1 + 1e-12))


class TestMaximalFunctions:
    def test_averages_of_one(self):
        sigma = GridMeasure.lebesgue(UNIT, 6)
        M = fractional_maximal(GridFunction.constant(sigma), sigma, CubeFamily(UNIT, 4), 0.0)
        assert np.allclose(M.flat, 1.0, rtol=1e-12)

    def test_zero(self):
        sigma = GridMeasure.lebesgue(UNIT, 5)
        M = fractional_maximal(GridFunction.constant(sigma, 0.0), sigma, CubeFamily(UNIT, 3), 0.5)
        assert not M.flat.any()

    def test_fractional_closed_form(self):
        # |Q|^(1/2 - 1) |Q| = |Q|^(1/2); the root gives the max, 1.
        sigma = GridMeasure.lebesgue(UNIT, 6)
        M = fractional_maximal(GridFunction.constant(sigma), sigma, CubeFamily(UNIT, 4), 0.5)
        assert np.allclose(M.flat, 1.0, rtol=1e-12)

    @pytest.mark.parametrize("alpha", [0.0, 0.5])
    def test_dyadic_basics(self, alpha):
        sigma = GridMeasure.lebesgue(UNIT, 6)
        fam = CubeFamily(UNIT, 4)
        one = GridFunction.constant(sigma)
        assert np.allclose(dyadic_maximal(one, sigma, fam, alpha).flat, 1.0)
        assert not dyadic_maximal(GridFunction.constant(sigma, 0.0), sigma, fam, alpha).flat.any()

    def test_dyadic_below_shifted(self):
        for seed in range(20):
            sigma, f = rand_pair(seed, L=6)
            fam = CubeFamily(UNIT, 4)
            for alpha in (0.0, 0.5):
                md = dyadic_maximal(f, sigma, fam, alpha).flat
                m = fractional_maximal(f, sigma, fam, alpha).flat
                assert np.all(md <= m * (1 + 1e-14))

    @settings(max_examples=20)
    @given(st.integers(0, 2 ** 31))
    def test_sublinear(self, seed):
        sigma, f = rand_pair(seed)
        _, g = rand_pair(seed + 7)
        fam = CubeFamily(UNIT, 3)
        M = lambda h: fractional_maximal(h, sigma, fam, 0.5).flat
        s = GridFunction.like(sigma, f.flat + g.flat)
        assert np.all(M(s) <= M(f) + M(g) + 1e-12)

    def test_scaling(self):
        sigma, f = rand_pair(8)
        fam = CubeFamily(UNIT, 3)
        a = fractional_maximal(f, sigma, fam, 0.5).flat
        b = fractional_maximal(f, sigma.scaled(2.5), fam, 0.5).flat
        assert np.allclose(b, 2.5 * a, rtol=1e-14)


class TestFractionalIntegral:
    def test_point_mass(self):
        nu = GridMeasure(Cube((0.0,), 1.0), 0, [1.0])
        assert fractional_integral(nu, 0.5, 4.0) == pytest.approx(0.5, rel=1e-15)

    def test_zero(self):
        assert fractional_integral(GridMeasure.zeros(UNIT, 5), 0.5, 0.3) == 0.0

    def test_lebesgue_at_endpoint(self):
        nu = GridMeasure.lebesgue(UNIT, 10)
        assert fractional_integral(nu, 0.5, 0.0) == pytest.approx(2.0, rel=0.05)

    def test_alpha_zero_rejected(self):
        with pytest.raises(ValueError):
            fractional_integral(GridMeasure.lebesgue(UNIT, 3), 0.0, 0.1)

    def test_grid_matches_pointwise(self):
        sigma, _ = rand_pair(9, L=5)
        grid = fractional_integral_grid(sigma, 0.5).flat
        pts = sigma.centers
        assert np.allclose(grid, [fractional_integral(sigma, 0.5, x) for x in pts], rtol=1e-12)

    def test_scaling(self):
        sigma, _ = rand_pair(10)
        a = fractional_integral_grid(sigma, 0.5).flat
        b = fractional_integral_grid(sigma.scaled(3.0), 0.5).flat
        assert np.allclose(b, 3.0 * a, rtol=1e-14)


def test_grid_function_round_trip():
    sigma, f = rand_pair(11)
    back = GridFunction.loads(f.dumps())
    assert np.array_equal(back.flat, f.flat)
