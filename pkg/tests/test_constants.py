import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from oracles import cancellation_direct, power_mass
from twoweight.constants import (a2_alpha, a2_value, cancellation_constant,
                                 cancellation_constant_dual, cancellation_value,
                                 kappa_cube_testing, kappa_cube_testing_dual,
                                 kappa_testing_value, monomial, multiindices, one_tailed_a2,
                                 one_tailed_a2_dual, poisson)
from twoweight.exceptions import DegenerateMeasureError
from twoweight.geometry import Cube, CubeFamily, enumerate_cubes
from twoweight.kernels import TruncationLadder, constant, hilbert, riesz
from twoweight.measures import GridMeasure, cube_mass, from_density
from twoweight.operators import GridFunction, apply_truncated

UNIT = Cube((0.5,), 1.0)
SYM = Cube((0.0,), 2.0)


def rand(seed, root=SYM, L=5):
    rng = np.random.default_rng(seed)
    return GridMeasure(root, L, rng.exponential(size=(2 ** L) ** root.n))


class TestA2:
    @pytest.mark.parametrize("L", [4, 7, 10])
    def test_lebesgue_pair(self, L):
        leb = GridMeasure.lebesgue(SYM, L)
        rep = a2_alpha(leb, leb, 0.0, CubeFamily(SYM, min(L, 5)))
        assert rep.value == pytest.approx(1.0, abs=1e-9)

    @pytest.mark.parametrize("c", [0.25, 4.0, 7.3])
    def test_homogeneous(self, c):
        s, w = rand(0), rand(1)
        fam = CubeFamily(SYM, 3)
        assert a2_alpha(s.scaled(c), w, 0.0, fam).value == pytest.approx(
            c * a2_alpha(s, w, 0.0, fam).value, rel=1e-14)

    def test_power_pair_against_exact_masses(self):
        # Oracle: closed-form interval masses over the same family.
        L, depth = 10, 7
        s = from_density(lambda x: np.abs(x[:, 0]) ** 0.5, SYM, L)
        with np.errstate(divide="ignore"):
            w = from_density(lambda x: np.abs(x[:, 0]) ** -0.5, SYM, L)
        fam = CubeFamily(SYM, depth)
        best = max(power_mass(0.5, Q.lower[0], Q.upper[0])
                   * power_mass(-0.5, Q.lower[0], Q.upper[0]) / Q.side ** 2
                   for Q in enumerate_cubes(fam))
        assert a2_alpha(s, w, 0.0, fam).value == pytest.approx(best, rel=0.10)

    def test_witness_reproduces(self):
        s, w = rand(2), rand(3)
        rep = a2_alpha(s, w, 0.5, CubeFamily(SYM, 3))
        assert a2_value(s, w, 0.5, rep.witness["cube"]) == pytest.approx(rep.value, rel=1e-12)

    def test_empty_family_fails(self):
        s = rand(4)
        with pytest.raises(ValueError):
            a2_alpha(s, s, 0.0, [])


class TestPoisson:
    def test_center_point_mass(self):
        L = 6
        m = np.zeros(2 ** L)
        m[2 ** (L - 1)] = 1.0      # the cell just right of 0
        mu = GridMeasure(SYM, L, m)
        w = mu.cell_width
        val = poisson(Cube((0.0,), 1.0), mu, 0.0)
        assert val == pytest.approx(1.0, abs=2 * w)

    def test_zero(self):
        assert poisson(Cube((0.0,), 1.0), GridMeasure.zeros(SYM, 4), 0.0) == 0.0

    def test_lebesgue_against_quadrature(self):
        exact = integrate.quad(lambda y: 1.0 / (1.0 + abs(y)) ** 2, -1, 1, points=[0])[0]
        val = poisson(Cube((0.0,), 1.0), GridMeasure.lebesgue(SYM, 10), 0.0)
        assert val == pytest.approx(exact, rel=0.01)


class TestOneTailed:
    @pytest.mark.parametrize("seed", range(5))
    @pytest.mark.parametrize("alpha", [0.0, 0.5])
    def test_dominates_interior_a2(self, seed, alpha):
        s, w = rand(seed), rand(seed + 10)
        fam = CubeFamily(SYM, 3)
        lower = 4 ** (alpha - 1) * a2_alpha(s, w, alpha, fam).value
        assert one_tailed_a2(s, w, alpha, fam).value >= lower * (1 - 1e-12)

    def test_zero_sigma(self):
        fam = CubeFamily(SYM, 3)
        assert one_tailed_a2(GridMeasure.zeros(SYM, 5), rand(1), 0.0, fam).value == 0.0

    def test_refinement(self):
        vals = []
        for L in (8, 10):
            leb = GridMeasure.lebesgue(UNIT, L)
            vals.append(one_tailed_a2(leb, leb, 0.0, CubeFamily(UNIT, 5)).value)
        assert vals[1] == pytest.approx(vals[0], rel=0.10)

    def test_dual_is_swap(self):
        s, w = rand(5), rand(6)
        fam = CubeFamily(SYM, 3)
        assert one_tailed_a2_dual(s, w, 0.0, fam).value == one_tailed_a2(w, s, 0.0, fam).value


class TestMonomial:
    def test_degree_zero(self):
        assert monomial(Cube((1.0,), 2.0), (0,), 5.0) == 1.0

    def test_linear(self):
        assert monomial(Cube((1.0,), 2.0), (1,), 2.0) == 0.5

    def test_vanishes_at_center(self):
        Q = Cube((0.3, 0.4), 1.0)
        assert monomial(Q, (1, 0), Q.center) == 0.0
        assert monomial(Q, (1, 1), Q.center) == 0.0

    def test_multiindices(self):
        assert multiindices(2, 3) == [(0, 0), (0, 1), (1, 0), (0, 2), (1, 1), (2, 0)]


class TestKappaTesting:
    def setup_method(self):
        self.s, self.w = rand(7, L=5), rand(8, L=5)
        self.fam = CubeFamily(SYM, 3)
        self.lad = TruncationLadder(((self.s.cell_width, 4.0), (4 * self.s.cell_width, 4.0)))

    def test_kappa_one_is_indicator_testing(self):
        # Oracle: T(1_Q sigma) through the plain operator, then the L2 ratio.
        best = 0.0
        for Q in enumerate_cubes(self.fam):
            idx = self.s.cells_in(Q)
            f = GridFunction.indicator(self.s, idx)
            sub = GridMeasure(SYM, 5, np.where(np.isin(np.arange(32), idx), self.s.flat, 0))
            for pair in self.lad.pairs:
                g = apply_truncated(hilbert(), 0, f, sub, pair).flat
                best = max(best, np.dot(g[idx] ** 2, self.w.flat[idx]) / self.s.flat[idx].sum())
        rep = kappa_cube_testing(hilbert(), self.s, self.w, 1, self.fam, self.lad)
        assert rep.value == pytest.approx(np.sqrt(best), rel=1e-12)

    def test_zero_omega(self):
        rep = kappa_cube_testing(hilbert(), self.s, GridMeasure.zeros(SYM, 5), 2, self.fam,
                                 self.lad)
        assert rep.value == 0.0

    def test_three_cell_constant_kernel(self):
        # Cells 0..3 on [0, 1] with the last cell empty; K = c, delta = one cell,
        # so T(m s)(x_i) = c (S - m_i s_i) with S = sum_k m_k s_k.
        c = 1.5
        s = np.array([1.0, 2.0, 0.5, 0.0])
        w = np.array([0.3, 1.0, 2.0, 0.0])
        sigma, omega = GridMeasure(UNIT, 2, s), GridMeasure(UNIT, 2, w)
        x = np.array([0.125, 0.375, 0.625])
        m1 = x - 0.5                                # ((x - c_Q)/side)^1 on the root
        def testing(m):
            S = m[0] * s[0] + m[1] * s[1] + m[2] * s[2]
            return (w[0] * (c * (S - m[0] * s[0])) ** 2 + w[1] * (c * (S - m[1] * s[1])) ** 2
                    + w[2] * (c * (S - m[2] * s[2])) ** 2) / (s[0] + s[1] + s[2])
        want = max(testing(np.ones(3)), testing(m1))
        rep = kappa_cube_testing(constant(1, c), sigma, omega, 2, CubeFamily(UNIT, 0),
                                 TruncationLadder.single(0.25, 2.0))
        assert rep.value ** 2 == pytest.approx(want, rel=1e-14)

    def test_monotone_in_kappa(self):
        vals = [kappa_cube_testing(hilbert(), self.s, self.w, k, self.fam, self.lad).value
                for k in (1, 2, 3)]
        assert vals[0] <= vals[1] <= vals[2]

    @pytest.mark.parametrize("c", [0.25, 4.0])
    def test_scales_with_root_c(self, c):
        a = kappa_cube_testing(hilbert(), self.s, self.w, 2, self.fam, self.lad).value
        b = kappa_cube_testing(hilbert(), self.s.scaled(c), self.w, 2, self.fam, self.lad).value
        assert b == pytest.approx(np.sqrt(c) * a, rel=1e-12)

    def test_witness_and_breakdown(self):
        rep = kappa_cube_testing(hilbert(), self.s, self.w, 2, self.fam, self.lad)
        wit = rep.witness
        again = kappa_testing_value(hilbert(), self.s, self.w, wit["cube"], wit["beta"],
                                    wit["pair"], wit["component"])
        assert np.sqrt(again) == pytest.approx(rep.value, rel=1e-12)
        assert max(rep.breakdown.values()) == pytest.approx(rep.value, rel=1e-15)

    def test_dual(self):
        a = kappa_cube_testing_dual(hilbert(), self.s, self.w, 2, self.fam, self.lad)
        b = kappa_cube_testing(hilbert().adjoint(), self.w, self.s, 2, self.fam, self.lad)
        assert a.value == b.value

    def test_degenerate(self):
        with pytest.raises(DegenerateMeasureError):
            kappa_cube_testing(hilbert(), GridMeasure.zeros(SYM, 5), self.w, 1, self.fam,
                               self.lad)

    def test_vector_kernel(self):
        root = Cube((0.0, 0.0), 1.0)
        s, w = rand(1, root, 3), rand(2, root, 3)
        rep = kappa_cube_testing(riesz(2), s, w, 2, CubeFamily(root, 1),
                                 TruncationLadder.single(s.cell_width, 2.0))
        assert rep.value > 0 and rep.witness["component"] in (0, 1)


class TestCancellation:
    def test_odd_symmetry(self):
        # Constant polynomial, antisymmetric kernel, symmetric measures: the
        # inner sum vanishes at the center cell pair straddling x0 = 0.
        leb = GridMeasure.lebesgue(SYM, 6)
        c = leb.centers[:, 0]
        vals = []
        for i in (31, 32):
            inner = sum(1 / (c[i] - c[k]) * leb.flat[k] for k in range(64)
                        if leb.cell_width <= abs(c[i] - c[k]) < 0.5)
            vals.append(inner)
        assert vals[0] == pytest.approx(-vals[1], abs=1e-12)
        sym = GridMeasure(SYM, 6, leb.flat + leb.flat[::-1])
        x0 = np.zeros(1)
        # centered ball: the integrand is odd, so the total vanishes up to round-off at x0
        full = cancellation_value(hilbert(), sym, sym, x0, 0.5, 1 / 32, [1.0], 1)
        half = cancellation_direct(lambda x, y: 1 / (x[0] - y[0]), sym, sym, x0, 0.5, 1 / 32)
        assert full == pytest.approx(half, rel=1e-12)

    def test_empty_ball_skipped(self):
        L = 5
        s = np.ones(32) / 32
        s[:16] = 0.0                      # no sigma on [-1, 0]
        sigma = GridMeasure(SYM, L, s)
        rep = cancellation_constant(hilbert(), sigma, GridMeasure.lebesgue(SYM, L), 1,
                                    [(-0.5,), (0.5,)], [0.25], [1 / 16])
        assert rep.witness["x0"] == (0.5,)

    def test_matches_direct_sum(self):
        L = 6
        leb = GridMeasure.lebesgue(SYM, L)
        rng = np.random.default_rng(3)
        for _ in range(5):
            x0 = rng.uniform(-1, 1, 1)
            N = float(rng.choice([0.25, 0.5, 1.0]))
            eps = float(rng.uniform(leb.cell_width, N))
            rep = cancellation_constant(hilbert(), leb, leb, 1, [x0], [N], [eps], poly_trials=0)
            want = cancellation_direct(lambda x, y: 1 / (x[0] - y[0]), leb, leb, x0, N, eps)
            assert rep.value == pytest.approx(want, rel=1e-12)

    def test_witness_reproduces_and_dual(self):
        s, w = rand(11, L=6), rand(12, L=6)
        args = (hilbert(), s, w, 2, [(0.0,), (0.3,)], [0.25, 0.5], [1 / 32, 1 / 16])
        rep = cancellation_constant(*args)
        wit = rep.witness
        again = cancellation_value(hilbert(), s, w, wit["x0"], wit["N"], wit["eps"],
                                   wit["coefficients"], 2, wit["component"])
        assert again == pytest.approx(rep.value, rel=1e-12)
        dual = cancellation_constant_dual(*args)
        assert dual.value == pytest.approx(
            cancellation_constant(hilbert().adjoint(), w, s, 2, *args[4:], seed=0,
                                  name="cancellation_dual").value, rel=1e-15)

    def test_eps_below_cell_rejected(self):
        s = rand(1, L=5)
        with pytest.raises(ValueError):
            cancellation_constant(hilbert(), s, s, 1, [(0.0,)], [0.5], [0.001])


@settings(max_examples=20)
@given(st.integers(0, 2 ** 31), st.floats(0.1, 10))
def test_a2_scaling_property(seed, c):
    s, w = rand(seed, L=4), rand(seed + 1, L=4)
    fam = CubeFamily(SYM, 2)
    a = a2_alpha(s, w, 0.5, fam).value
    assert a2_alpha(s, w.scaled(c), 0.5, fam).value == pytest.approx(c * a, rel=1e-13)


def test_cube_mass_consistency_with_a2():
    s = rand(9)
    Q = Cube((0.5,), 1.0)
    assert a2_value(s, s, 0.0, Q) == pytest.approx(cube_mass(s, Q) ** 2, rel=1e-14)
