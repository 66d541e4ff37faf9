"""Free energy and derivatives for a fully unknown linear response matrix.

Data model ``d = r e^a + n`` where ``r`` is an ``n x n`` matrix with its own
Gaussian prior. This is a verification fixture for small ``n``: dense storage,
explicit index loops (see :mod:`opcalc.kernels`), no minimizer.

Conventions:

* the response is flattened row-major, ``r[j, i] -> j * n + i``, and
  ``(r e^a)_j = sum_i r[j, i] exp(a_i)``;
* joint vectors put the ``n * n`` response entries first, then the ``n`` signal
  pixels;
* every integral over an index is a plain sum and every delta is a Kronecker
  delta. ``A``, ``R`` and ``Ninv`` are the matrices of the discretized
  quadratic forms, so the scalar model of :mod:`opcalc.selfcal` corresponds to
  ``r = rho * I`` and ``Ninv = pixel_volume / sigma_n**2 * I``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels

MAX_GENERAL_PIXELS = 8
LOG_2PI = np.log(2.0 * np.pi)


@dataclass(frozen=True)
class GeneralState:
    m_a: np.ndarray
    m_r: np.ndarray
    D: np.ndarray

    def __post_init__(self):
        m_a = np.asarray(self.m_a, dtype=float).ravel()
        n = m_a.size
        if not 1 <= n <= MAX_GENERAL_PIXELS:
            raise ValueError(f"general response model supports 1..{MAX_GENERAL_PIXELS} pixels, got {n}")
        m_r = np.asarray(self.m_r, dtype=float).reshape(n, n)
        d = np.asarray(self.D, dtype=float)
        size = n * n + n
        if d.shape != (size, size):
            raise ValueError(f"joint covariance must be {size}x{size}, got {d.shape}")
        if not np.allclose(d, d.T, rtol=0, atol=1e-12 * max(1.0, np.abs(d).max())):
            raise ValueError("joint covariance must be symmetric")
        object.__setattr__(self, "m_a", m_a)
        object.__setattr__(self, "m_r", m_r)
        object.__setattr__(self, "D", 0.5 * (d + d.T))

    @property
    def n(self) -> int:
        return self.m_a.size

    @property
    def D_rr(self) -> np.ndarray:
        return self.D[: self.n**2, : self.n**2]

    @property
    def D_ra(self) -> np.ndarray:
        return self.D[: self.n**2, self.n**2 :]

    @property
    def D_aa(self) -> np.ndarray:
        return self.D[self.n**2 :, self.n**2 :]

    @property
    def mean(self) -> np.ndarray:
        return np.concatenate((self.m_r.ravel(), self.m_a))

    def with_mean(self, mean) -> GeneralState:
        mean = np.asarray(mean, dtype=float)
        n = self.n
        return GeneralState(mean[n * n :], mean[: n * n].reshape(n, n), self.D)


def _lin(state: GeneralState) -> np.ndarray:
    return np.exp(state.m_a + 0.5 * np.diag(state.D_aa))


def _check(state, d, A, R, Ninv):
    n = state.n
    d = np.asarray(d, dtype=float).ravel()
    A = np.asarray(A, dtype=float)
    R = np.asarray(R, dtype=float)
    Ninv = np.asarray(Ninv, dtype=float)
    if d.shape != (n,) or A.shape != (n, n) or R.shape != (n * n, n * n) or Ninv.shape != (n, n):
        raise ValueError("inconsistent dimensions for data, priors or noise")
    if not np.allclose(Ninv, Ninv.T):
        raise ValueError("Ninv must be symmetric")
    return d, A, R, Ninv


def _kernel_args(state, Ninv):
    return Ninv, _lin(state), state.D_aa, state.D_rr, state.D_ra, state.m_r


def hamiltonian_general(a, r, d, A, R, Ninv) -> float:
    """``a^T A^-1 a / 2 + r^T R^-1 r / 2 + (d - r e^a)^T Ninv (d - r e^a) / 2``."""
    a = np.asarray(a, dtype=float)
    r = np.asarray(r, dtype=float)
    n = a.size
    res = d - r.reshape(n, n) @ np.exp(a)
    return float(
        0.5 * a @ np.linalg.solve(A, a) + 0.5 * r.ravel() @ np.linalg.solve(R, r.ravel()) + 0.5 * res @ Ninv @ res
    )


def general_terms(state: GeneralState, d, A, R, Ninv) -> dict:
    """Separate contributions to ``G``; all but ``entropy`` sum to ``<H>``."""
    d, A, R, Ninv = _check(state, d, A, R, Ninv)
    n = state.n
    try:
        chol = np.linalg.cholesky(state.D)
    except np.linalg.LinAlgError:
        raise np.linalg.LinAlgError("joint covariance is not positive definite") from None
    logdet = 2.0 * np.sum(np.log(np.diag(chol)))
    a_inv, r_inv = np.linalg.inv(A), np.linalg.inv(R)
    mr = state.m_r.ravel()
    e = _lin(state)
    c = Ninv @ d
    tilted = state.m_r + state.D_ra[np.arange(n * n), np.tile(np.arange(n), n)].reshape(n, n)
    return {
        "entropy": -0.5 * ((n * n + n) * (1.0 + LOG_2PI) + logdet),
        "prior": 0.5 * (state.m_a @ a_inv @ state.m_a + mr @ r_inv @ mr)
        + 0.5 * (np.sum(a_inv * state.D_aa) + np.sum(r_inv * state.D_rr)),
        "data_const": 0.5 * float(d @ Ninv @ d),
        "data_linear": -float(c @ tilted @ e),
        "data_quadratic": float(kernels.quad_energy(*_kernel_args(state, Ninv))),
    }


def gibbs_energy_general(state: GeneralState, d, A, R, Ninv) -> float:
    return float(sum(general_terms(state, d, A, R, Ninv).values()))


def grad_general(state: GeneralState, d, A, R, Ninv):
    """``(dG/dm_a, dG/dm_r)``; the second has the shape of the response matrix."""
    d, A, R, Ninv = _check(state, d, A, R, Ninv)
    n = state.n
    e = _lin(state)
    c = Ninv @ d
    # tilted[j, i] = m_r[j, i] + D_ra[(ji), i]
    tilted = state.m_r + state.D_ra[np.arange(n * n), np.tile(np.arange(n), n)].reshape(n, n)
    args = _kernel_args(state, Ninv)
    grad_a = np.linalg.solve(A, state.m_a) - (c @ tilted) * e + kernels.quad_grad_a(*args)
    grad_r = np.linalg.solve(R, state.m_r.ravel()).reshape(n, n) - np.outer(c, e) + kernels.quad_grad_r(*args)
    return grad_a, grad_r


def joint_gradient_general(state: GeneralState, d, A, R, Ninv) -> np.ndarray:
    grad_a, grad_r = grad_general(state, d, A, R, Ninv)
    return np.concatenate((grad_r.ravel(), grad_a))


def hessian_general(state: GeneralState, d, A, R, Ninv) -> np.ndarray:
    """Joint Hessian in the mean, response entries first."""
    d, A, R, Ninv = _check(state, d, A, R, Ninv)
    n = state.n
    nn = n * n
    e = _lin(state)
    c = Ninv @ d
    tilted = state.m_r + state.D_ra[np.arange(nn), np.tile(np.arange(n), n)].reshape(n, n)
    args = _kernel_args(state, Ninv)

    hess = np.zeros((nn + n, nn + n))
    aa = np.linalg.inv(A) + kernels.quad_hess_aa(*args)
    aa[np.diag_indices(n)] -= (c @ tilted) * e
    # d^2(data_linear) / d m_r[u, v] d a_p = -c_u e_p delta_vp
    ar = kernels.quad_hess_ar(*args)
    for u in range(n):
        for v in range(n):
            ar[u * n + v, v] -= c[u] * e[v]
    rr = np.linalg.inv(R) + kernels.quad_hess_rr(Ninv, e, state.D_aa)
    hess[:nn, :nn] = rr
    hess[:nn, nn:] = ar
    hess[nn:, :nn] = ar.T
    hess[nn:, nn:] = aa
    return 0.5 * (hess + hess.T)
