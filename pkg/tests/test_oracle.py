import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from opcalc.operators import GaussianParams
from opcalc.oracle import (
    finite_diff_gradient,
    finite_diff_jacobian,
    gaussian_factor,
    mc_expectation,
    quadrature_expectation,
)

G2 = GaussianParams([0.4, -0.2], [[0.6, 0.25], [0.25, 0.9]])


def test_constant_integrand_has_zero_error():
    est = mc_expectation(lambda s: np.ones(len(s)), G2, n_samples=1000)
    assert est.value == 1.0 and est.stderr == 0.0 and est.n_samples == 1000


def test_lognormal_mean():
    g = GaussianParams([0.5], [[0.25]])
    est = mc_expectation(lambda s: np.exp(s[:, 0]), g, n_samples=1_000_000, seed=1)
    assert est.agrees(np.exp(0.625))
    assert np.exp(0.625) == pytest.approx(1.868, abs=5e-4)


def test_two_point_function_target():
    est = mc_expectation(lambda s: s[:, 0] * s[:, 1], G2, n_samples=1_000_000, seed=2)
    assert est.agrees(0.4 * -0.2 + 0.25)


def test_mc_is_reproducible():
    f = lambda s: np.sin(s[:, 0]) + s[:, 1] ** 2  # noqa: E731
    a = mc_expectation(f, G2, n_samples=250_000, seed=9)
    b = mc_expectation(f, G2, n_samples=250_000, seed=9)
    assert a == b
    assert a != mc_expectation(f, G2, n_samples=250_000, seed=10)


def test_mc_scalar_and_vectorized_agree():
    f_vec = lambda s: s[:, 0] ** 2 * np.exp(0.3 * s[:, 1])  # noqa: E731
    f_one = lambda s: s[0] ** 2 * np.exp(0.3 * s[1])  # noqa: E731
    a = mc_expectation(f_vec, G2, n_samples=2000, seed=3)
    b = mc_expectation(f_one, G2, n_samples=2000, seed=3, vectorized=False)
    assert a.value == pytest.approx(b.value, rel=1e-12)


def test_stderr_is_sample_std_over_root_n():
    f = lambda s: s[:, 0] + s[:, 1] ** 2  # noqa: E731
    n = 20_000
    est = mc_expectation(f, G2, n_samples=n, seed=5)
    rng = np.random.default_rng([5, 0])
    chol = np.linalg.cholesky(G2.cov)
    samples = G2.mean + rng.standard_normal((n, 2)) @ chol.T
    values = f(samples)
    assert est.value == pytest.approx(values.mean(), rel=1e-12)
    assert est.stderr == pytest.approx(values.std(ddof=1) / np.sqrt(n), rel=1e-9)


def test_stderr_scaling():
    f = lambda s: np.exp(0.5 * s[:, 0]) * s[:, 1]  # noqa: E731
    errs = {n: mc_expectation(f, G2, n_samples=n, seed=11).stderr for n in (1_000, 10_000, 100_000)}
    for n in (1_000, 10_000):
        ratio = errs[n] / errs[10 * n]
        assert abs(ratio / np.sqrt(10) - 1) < 0.2


def test_too_few_samples():
    with pytest.raises(ValueError):
        mc_expectation(lambda s: s[:, 0], G2, n_samples=10)


def test_indefinite_covariance_fails_factorization():
    with pytest.raises(np.linalg.LinAlgError):
        gaussian_factor(np.array([[1.0, 2.0], [2.0, 1.0]]))


def test_semidefinite_covariance_gets_jitter():
    L = gaussian_factor(np.ones((2, 2)))
    assert np.allclose(L @ L.T, np.ones((2, 2)), atol=1e-10)


@pytest.mark.parametrize(
    "f, m, d, expected",
    [
        (lambda s: s[:, 0] ** 2, 0.0, 1.0, 1.0),
        (lambda s: np.exp(2 * s[:, 0]), 0.0, 1.0, np.exp(2.0)),
        (lambda s: s[:, 0] * np.exp(s[:, 0]), 1.0, 0.5, 1.5 * np.exp(1.25)),
    ],
)
def test_quadrature_closed_forms(f, m, d, expected):
    assert quadrature_expectation(f, GaussianParams([m], [[d]])) == pytest.approx(expected, rel=1e-12)


def test_quadrature_dimension_cap():
    with pytest.raises(ValueError):
        quadrature_expectation(lambda s: s[:, 0], GaussianParams(np.zeros(4), np.eye(4)))
    with pytest.raises(ValueError):
        quadrature_expectation(lambda s: s[:, 0], G2, n_nodes=16)


def test_quadrature_and_mc_agree():
    f = lambda s: np.cos(s[:, 0]) * np.exp(0.4 * s[:, 1]) + s[:, 0] ** 3  # noqa: E731
    est = mc_expectation(f, G2, n_samples=1_000_000, seed=21)
    assert est.agrees(quadrature_expectation(f, G2))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(1e-4, 1.0))
def test_central_differences_exact_on_quadratics(seed, h):
    rng = np.random.default_rng(seed)
    q = rng.normal(size=(4, 4))
    q = q + q.T
    b = rng.normal(size=4)
    x = rng.normal(size=4)
    fd = finite_diff_gradient(lambda y: 0.5 * y @ q @ y + b @ y, x, h=h)
    exact = q @ x + b
    assert np.allclose(fd, exact, rtol=0, atol=1e-9 * (1 + np.abs(q).sum() * (1 + np.abs(x).max())) / min(h, 1.0))


def test_exponential_gradient():
    fd = finite_diff_gradient(lambda x: np.exp(x[0]), np.array([0.0]), h=1e-5)
    assert abs(fd[0] - 1.0) < 1e-9


def test_default_step_gradient_and_jacobian():
    x = np.array([0.3, -1.2, 2.0])
    F = lambda y: np.sin(y[0]) * y[1] + y[2] ** 3  # noqa: E731
    exact = np.array([np.cos(x[0]) * x[1], np.sin(x[0]), 3 * x[2] ** 2])
    assert np.allclose(finite_diff_gradient(F, x), exact, rtol=1e-8)
    G = lambda y: np.array([y[0] * y[1], np.exp(y[2])])  # noqa: E731
    jac = finite_diff_jacobian(G, x)
    expected = np.array([[x[1], x[0], 0.0], [0.0, 0.0, np.exp(x[2])]])
    assert jac.shape == expected.shape
    assert np.allclose(jac, expected, rtol=1e-8, atol=1e-10)


def test_nonpositive_step_rejected():
    with pytest.raises(ValueError):
        finite_diff_gradient(lambda y: y.sum(), np.zeros(2), h=0.0)
