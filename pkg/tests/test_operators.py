import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from opcalc import operators as op
from opcalc.oracle import mc_expectation, quadrature_expectation
from opcalc.verify import random_expression, random_gaussian

I1, I2 = op.IndexSet(1), op.IndexSet(2)

M2 = np.array([0.3, -0.7])
D2 = np.array([[0.5, 0.2], [0.2, 0.8]])
G2 = op.GaussianParams(M2, D2)

seeds = st.integers(0, 2**32 - 1)


def rel(a, b):
    return abs(a - b) / max(abs(b), 1e-300)


class TestValidation:
    def test_index_set_positive(self):
        with pytest.raises(ValueError):
            op.IndexSet(0)

    @pytest.mark.parametrize("i", [-1, 2, 5])
    def test_index_out_of_range(self, i):
        with pytest.raises(IndexError):
            op.phi(I2, i)
        with pytest.raises(IndexError):
            op.moment(I2, [0, i])

    def test_vector_length_checked(self):
        with pytest.raises(ValueError):
            op.exp_phi(I2, [1.0])

    def test_gaussian_params_checks(self):
        with pytest.raises(ValueError):
            op.GaussianParams([0, 0], [[1, 0.5], [0.4, 1]])
        with pytest.raises(ValueError):
            op.GaussianParams([0, 0], [[1, 2], [2, 1]])
        with pytest.raises(ValueError):
            op.GaussianParams([0, 0, 0], np.eye(2))
        # semi-definite is fine
        op.GaussianParams([0, 0], [[1, 1], [1, 1]])

    def test_index_set_mismatch(self):
        with pytest.raises(ValueError):
            op.multiply(op.phi(I1, 0), op.phi(I2, 0))
        with pytest.raises(ValueError):
            op.expectation(op.phi(I1, 0), G2)


class TestConstructors:
    def test_phi_has_two_terms(self):
        e = op.phi(I1, 0)
        assert len(e.terms) == 2
        assert op.normal_order(e) is e

    def test_phi_expectation_is_mean(self):
        assert op.expectation(op.phi(I2, 0), G2) == M2[0]
        assert op.expectation(op.moment(I2, [1]), G2) == M2[1]

    def test_zero_expression_is_empty(self):
        assert op.constant(I2, 0.0).terms == ()
        assert (op.phi(I2, 0) - op.phi(I2, 0)).terms == ()

    def test_exp_phi_single_term(self):
        (t,) = op.exp_phi(I2, [1.0, -0.5]).terms
        assert t.b_exponent == t.c_exponent == (1.0, -0.5)

    def test_exp_phi_zero_is_one(self):
        e = op.exp_phi(I2, [0.0, 0.0])
        assert len(e.terms) == 1 and e.terms[0].coeff == 1.0 and e.terms[0].b_exponent is None

    def test_exp_phi_lognormal_mean(self):
        assert rel(op.expectation(op.exp_phi(I2, [1, 0]), G2), np.exp(M2[0] + 0.5 * D2[0, 0])) < 1e-15

    def test_exp_phi_two_directions(self):
        expected = np.exp(M2.sum() + 0.5 * (D2[0, 0] + D2[1, 1]) + D2[0, 1])
        assert rel(op.expectation(op.exp_phi(I2, [1, 1]), G2), expected) < 1e-15


class TestOrdering:
    def test_commutator(self):
        e = op.normal_order(op.concat(op.annihilation(I2, 0), op.creation(I2, 1)))
        got = sorted((t.coeff, t.d_factors, t.b_powers, t.c_powers) for t in e.terms)
        assert got == [(1.0, (), (1,), (0,)), (1.0, ((0, 1),), (), ())]

    def test_derivation_rule(self):
        e = op.normal_order(op.concat(op.annihilation(I2, 0), op.exp_creation(I2, [0, 1])))
        got = sorted((t.d_factors, t.b_exponent, t.c_powers) for t in e.terms)
        assert got == [((), (0.0, 1.0), (0,)), (((0, 1),), (0.0, 1.0), ())]

    def test_exponential_swap(self):
        e = op.normal_order(op.concat(op.exp_annihilation(I2, [1, 0]), op.exp_creation(I2, [0, 1])))
        (t,) = e.terms
        assert t.d_exponent == (((0, 1), 1.0),)
        assert t.b_exponent == (0.0, 1.0) and t.c_exponent == (1.0, 0.0)

    def test_normal_term_unchanged(self):
        e = op.multiply(op.creation(I2, 1), op.annihilation(I2, 0))
        assert e.is_normal
        assert op.normal_order(e) is e
        (t,) = e.terms
        assert t.b_powers == (1,) and t.c_powers == (0,) and not t.d_factors

    def test_dump_one_line_per_term(self):
        e = op.concat(op.annihilation(I2, 0), op.exp_creation(I2, [0, 1]))
        lines = e.dump().splitlines()
        assert len(lines) == 2
        assert any("D[0,1]" in line for line in lines)
        assert any(line.endswith("c[0]") for line in lines)


class TestMoments:
    def test_two_point_function(self):
        for x in range(2):
            for y in range(2):
                value = op.expectation(op.multiply(op.phi(I2, x), op.phi(I2, y)), G2)
                assert rel(value, M2[x] * M2[y] + D2[x, y]) < 1e-15

    def test_phi_squared_scalar(self):
        g = op.GaussianParams([0.5], [[0.25]])
        assert op.expectation(op.phi(I1, 0) ** 2, g) == pytest.approx(0.5, rel=1e-15)

    def test_fourth_moment(self):
        g = op.GaussianParams([0.0], [[1.0]])
        assert op.expectation(op.moment(I1, [0, 0, 0, 0]), g) == 3.0

    @pytest.mark.parametrize("k", [1, 3, 5])
    def test_odd_central_moments_vanish(self, k):
        g = op.GaussianParams([0.0, 0.0], D2)
        assert op.expectation(op.moment(I2, [0, 1] * k + [0]), g) == 0.0

    def test_cubic_moment_frozen(self):
        # Isserlis: m0^2 m1 + D00 m1 + 2 D01 m0
        e = op.moment(I2, [0, 0, 1])
        assert op.expectation(e, G2) == pytest.approx(-0.293, rel=1e-14)
        ref = quadrature_expectation(lambda s: s[:, 0] ** 2 * s[:, 1], G2)
        assert rel(op.expectation(e, G2), ref) < 1e-10

    def test_multiply_identity(self):
        e = op.phi(I2, 0) * op.exp_phi(I2, [0.2, 0.1])
        assert op.multiply(e, op.constant(I2, 1.0)).terms == e.terms
        assert op.multiply(op.constant(I2, 1.0), e).terms == e.terms

    def test_linear_times_exponential_mc(self):
        e = op.multiply(op.phi(I2, 0), op.exp_phi(I2, [0, 1]))
        exact = (M2[0] + D2[0, 1]) * np.exp(M2[1] + 0.5 * D2[1, 1])
        assert rel(op.expectation(e, G2), exact) < 1e-14
        est = mc_expectation(lambda s: s[:, 0] * np.exp(s[:, 1]), G2, n_samples=1_000_000, seed=4)
        assert est.agrees(exact, n_sigma=3.0)

    def test_power_series_of_exponential(self):
        from math import factorial

        g = op.GaussianParams([0.2], [[0.3]])
        series = op.power_series(I1, [1.0 / factorial(k) for k in range(25)])
        assert rel(op.expectation(series, g), np.exp(0.2 + 0.15)) < 1e-12


class TestProperties:
    @settings(max_examples=40, deadline=None)
    @given(seeds)
    def test_point_mass_evaluates_function(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(1, 4))
        expr, f, _ = random_expression(rng, n)
        m = rng.normal(size=n) * 0.5
        g = op.GaussianParams(m, np.zeros((n, n)))
        assert op.expectation(expr, g) == pytest.approx(f(m)[0], rel=1e-12, abs=1e-14)

    @settings(max_examples=40, deadline=None)
    @given(seeds, st.floats(-3, 3), st.floats(-3, 3))
    def test_linearity(self, seed, a, b):
        rng = np.random.default_rng(seed)
        e1, _, _ = random_expression(rng, 2)
        e2, _, _ = random_expression(rng, 2)
        g = random_gaussian(rng, 2)
        lhs = op.expectation(e1 * a + e2 * b, g)
        rhs = a * op.expectation(e1, g) + b * op.expectation(e2, g)
        scale = abs(a * op.expectation(e1, g)) + abs(b * op.expectation(e2, g))
        assert abs(lhs - rhs) <= 1e-12 * max(scale, 1e-300)

    @settings(max_examples=25, deadline=None)
    @given(seeds)
    def test_unordered_product_matches_quadrature(self, seed):
        rng = np.random.default_rng(seed)
        e1, f1, _ = random_expression(rng, 2, max_degree=2, max_exps=1)
        e2, f2, _ = random_expression(rng, 2, max_degree=2, max_exps=1)
        g = random_gaussian(rng, 2)
        raw = op.concat(e1, e2)
        assert not raw.is_normal
        ref = quadrature_expectation(lambda s: f1(s) * f2(s), g)
        assert abs(op.expectation(raw, g) - ref) <= 1e-8 * max(abs(ref), 1e-12)

    @settings(max_examples=25, deadline=None)
    @given(seeds)
    def test_product_factorizes_without_correlation(self, seed):
        rng = np.random.default_rng(seed)
        f = op.linear(I2, [rng.normal(), 0.0], rng.normal()) * op.exp_phi(I2, [rng.uniform(-0.5, 0.5), 0.0])
        h = op.linear(I2, [0.0, rng.normal()], rng.normal()) ** 2
        g = op.GaussianParams(rng.normal(size=2), np.diag(rng.uniform(0.1, 1.0, size=2)))
        lhs = op.expectation(op.multiply(f, h), g)
        rhs = op.expectation(f, g) * op.expectation(h, g)
        assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-14)
