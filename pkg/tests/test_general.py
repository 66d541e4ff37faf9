import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from opcalc import operators as op
from opcalc.config import ModelConfig
from opcalc.field import Field, Grid1D, PowerSpectrum
from opcalc.general import (
    GeneralState,
    general_terms,
    gibbs_energy_general,
    grad_general,
    hamiltonian_general,
    hessian_general,
    joint_gradient_general,
)
from opcalc.oracle import finite_diff_gradient, finite_diff_jacobian
from opcalc.selfcal import GibbsState, gibbs_terms, grad_gibbs, prior_matrices
from opcalc.verify import general_operator_terms, general_problem, rel_err

seeds = st.integers(0, 2**32 - 1)


def test_size_limits():
    with pytest.raises(ValueError):
        GeneralState(np.zeros(9), np.zeros((9, 9)), np.eye(90))
    with pytest.raises(ValueError):
        GeneralState(np.zeros(2), np.zeros((2, 2)), np.eye(5))
    with pytest.raises(ValueError):
        GeneralState(np.zeros(2), np.zeros((2, 2)), np.triu(np.ones((6, 6))))


def test_blocks_and_mean_layout():
    D = np.arange(36.0).reshape(6, 6)
    D = D + D.T
    s = GeneralState([1.0, 2.0], [[3.0, 4.0], [5.0, 6.0]], D)
    assert s.mean.tolist() == [3.0, 4.0, 5.0, 6.0, 1.0, 2.0]
    assert np.array_equal(s.D_rr, D[:4, :4]) and np.array_equal(s.D_ra, D[:4, 4:]) and np.array_equal(s.D_aa, D[4:, 4:])
    assert np.array_equal(s.with_mean(s.mean).mean, s.mean)


@settings(max_examples=10, deadline=None)
@given(seeds)
def test_gradient_vs_finite_differences(seed):
    state, d, A, R, Ninv = general_problem(np.random.default_rng(seed))
    fd = finite_diff_gradient(lambda x: gibbs_energy_general(state.with_mean(x), d, A, R, Ninv), state.mean)
    assert rel_err(joint_gradient_general(state, d, A, R, Ninv), fd) < 1e-6


@settings(max_examples=10, deadline=None)
@given(seeds)
def test_hessian_blocks_vs_finite_differences(seed):
    state, d, A, R, Ninv = general_problem(np.random.default_rng(seed))
    fd = finite_diff_jacobian(lambda x: joint_gradient_general(state.with_mean(x), d, A, R, Ninv), state.mean)
    h = hessian_general(state, d, A, R, Ninv)
    for rows, cols in ((slice(4, 6), slice(4, 6)), (slice(0, 4), slice(4, 6)), (slice(0, 4), slice(0, 4))):
        assert rel_err(h[rows, cols], fd[rows, cols]) < 1e-4
    assert np.array_equal(h, h.T)


def test_engine_terms():
    rng = np.random.default_rng(3)
    for _ in range(3):
        state, d, A, R, Ninv = general_problem(rng)
        terms = general_terms(state, d, A, R, Ninv)
        g = op.GaussianParams(state.mean, state.D)
        for name, expr in general_operator_terms(d, Ninv, 2).items():
            assert terms[name] == pytest.approx(op.expectation(expr, g), rel=1e-8)


def test_point_mass_limit():
    state, d, A, R, Ninv = general_problem(np.random.default_rng(6))
    eps = 1e-10
    tiny = GeneralState(state.m_a, state.m_r, eps * np.eye(6))
    terms = general_terms(tiny, d, A, R, Ninv)
    u = sum(v for k, v in terms.items() if k != "entropy")
    h = hamiltonian_general(state.m_a, state.m_r, d, A, R, Ninv)
    assert u == pytest.approx(h, rel=1e-7)


def test_zero_problem_has_zero_gradient():
    state = GeneralState(np.zeros(2), np.zeros((2, 2)), np.zeros((6, 6)))
    ga, gr = grad_general(state, np.zeros(2), np.eye(2), np.eye(4), np.eye(2))
    assert np.all(ga == 0) and np.all(gr == 0)


def test_rr_block_at_origin():
    state = GeneralState(np.zeros(2), np.zeros((2, 2)), np.zeros((6, 6)))
    A = np.array([[1.0, 0.2], [0.2, 1.0]])
    R = np.diag([0.5, 1.0, 2.0, 4.0])
    Ninv = np.array([[2.0, 0.3], [0.3, 1.5]])
    h = hessian_general(state, np.array([0.4, -0.1]), A, R, Ninv)
    # d^2/dr[j,i] dr[k,l] of the quadratic data term is Ninv[j,k] e^{a_i} e^{a_l}
    expected = np.linalg.inv(R) + np.kron(Ninv, np.ones((2, 2)))
    assert np.allclose(h[:4, :4], expected, rtol=1e-14)


def test_dimension_mismatch():
    state, d, A, R, Ninv = general_problem(np.random.default_rng(0))
    with pytest.raises(ValueError):
        gibbs_energy_general(state, np.zeros(3), A, R, Ninv)
    with pytest.raises(ValueError):
        gibbs_energy_general(state, d, A, R, np.array([[1.0, 0.2], [0.0, 1.0]]))


def test_indefinite_covariance():
    state, d, A, R, Ninv = general_problem(np.random.default_rng(0))
    bad = GeneralState(state.m_a, state.m_r, -np.eye(6))
    with pytest.raises(np.linalg.LinAlgError):
        gibbs_energy_general(bad, d, A, R, Ninv)


@settings(max_examples=10, deadline=None)
@given(seeds)
def test_pixel_relabelling_invariance(seed):
    rng = np.random.default_rng(seed)
    n = 3
    nn = n * n
    b = rng.normal(size=(nn + n, nn + n))
    D = 0.1 * b @ b.T / (nn + n) + 0.02 * np.eye(nn + n)
    state = GeneralState(rng.normal(size=n) * 0.3, rng.normal(size=(n, n)) + np.eye(n), D)
    A = np.eye(n) + 0.2
    c = rng.normal(size=(nn, nn))
    R = c @ c.T / nn + np.eye(nn)
    Ninv = np.eye(n) * 2 + 0.3
    d = rng.normal(size=n)
    perm = rng.permutation(n)
    rperm = (perm[:, None] * n + perm[None, :]).ravel()
    jp = np.concatenate((rperm, nn + perm))
    moved = GeneralState(state.m_a[perm], state.m_r[np.ix_(perm, perm)], D[np.ix_(jp, jp)])
    e1 = gibbs_energy_general(state, d, A, R, Ninv)
    e2 = gibbs_energy_general(moved, d[perm], A[np.ix_(perm, perm)], R[np.ix_(rperm, rperm)], Ninv[np.ix_(perm, perm)])
    assert e2 == pytest.approx(e1, rel=1e-12)


def test_scalar_model_embedding():
    """The diagonal response ``(rho + r0) I`` reproduces the scalar model's data terms and gradients."""
    cfg = ModelConfig(grid=Grid1D(2), spectrum=PowerSpectrum(0.6, 1.0, 2.0), sigma_n=0.4, r0=1.5, R=0.3)
    rng = np.random.default_rng(9)
    cov = rng.normal(size=(3, 3))
    cov = 0.1 * cov @ cov.T + 0.05 * np.eye(3)
    mean = np.array([0.3, -0.2, 0.1])
    scalar = GibbsState.from_joint(cfg.grid, mean, cov)
    d = Field(cfg.grid, [2.0, 1.1])

    n = 2
    unit = np.eye(n).ravel()
    lift = np.zeros((n * n + n, 1 + n))
    lift[: n * n, 0] = unit
    lift[n * n :, 1:] = np.eye(n)
    D = lift @ cov @ lift.T
    general = GeneralState(mean[1:], (mean[0] + cfg.r0) * np.eye(n), D)
    A, a_inv = prior_matrices(cfg)
    Ninv = cfg.noise_weight * np.eye(n)
    R = np.eye(n * n)

    st_terms = gibbs_terms(scalar, d, cfg)
    # the lifted covariance is singular; a negligible jitter makes the log-determinant defined
    jittered = GeneralState(general.m_a, general.m_r, D + 1e-13 * np.eye(n * n + n))
    ge_terms = general_terms(jittered, d.values, A, R, Ninv)
    for name in ("data_const", "data_linear", "data_quadratic"):
        assert ge_terms[name] == pytest.approx(st_terms[name], rel=1e-10)

    ga_s, gr_s = grad_gibbs(scalar, d, cfg)
    ga_g, gr_g = grad_general(general, d.values, A, R, Ninv)
    # remove the prior contributions, which differ between the two models
    data_a_s = ga_s.values - a_inv @ mean[1:]
    data_a_g = ga_g - a_inv @ mean[1:]
    data_r_s = gr_s - mean[0] / cfg.R
    data_r_g = gr_g - general.m_r
    assert np.allclose(data_a_g, data_a_s, rtol=1e-12)
    assert np.trace(data_r_g) == pytest.approx(data_r_s, rel=1e-12)
