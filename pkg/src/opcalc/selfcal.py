"""Variational (Gibbs free energy) self-calibration for a log-normal signal.

Data model: ``d = (r + r0) exp(a) + n`` with ``a ~ G(0, A)``, scalar
``r ~ G(0, R)`` and white noise of amplitude ``sigma_n``. The posterior over
``s = (r, a)`` is approximated by ``G(s - m, D)``; the free energy ``G(m, D)``
is available in closed form because every expectation involved is a product
of a low-order polynomial and an exponential of a Gaussian variable.

Joint vectors and matrices always put the response coordinate first:
index 0 is ``r``, indices ``1..n`` are the pixels of ``a``.

All derivatives are ordinary partial derivatives with respect to the pixel
values (not functional derivatives), so the pixel volume enters through the
noise weight ``pixel_volume / sigma_n**2`` only.
"""

from __future__ import annotations

import functools
import logging
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import linalg

from .config import ModelConfig
from .field import Field, FourierCovariance, Grid1D, PowerSpectrum, inner, sample_gaussian_field

logger = logging.getLogger(__name__)

MAX_DENSE_STATE = 1024
LOG_2PI = np.log(2.0 * np.pi)


class NotPositiveDefiniteError(np.linalg.LinAlgError):
    """The trial covariance has no log-determinant; the caller must re-regularize."""


@functools.lru_cache(maxsize=8)
def _prior_matrices(grid: Grid1D, spectrum: PowerSpectrum):
    cov = FourierCovariance(grid, spectrum)
    dense, dense_inv = cov.dense(), cov.dense_inverse()
    dense.setflags(write=False)
    dense_inv.setflags(write=False)
    return dense, dense_inv


def prior_matrices(config: ModelConfig):
    """Dense ``(A, A^-1)`` for the configured signal prior."""
    if config.grid.n_pixels > MAX_DENSE_STATE:
        raise ValueError(f"dense Gibbs state is capped at {MAX_DENSE_STATE} pixels")
    return _prior_matrices(config.grid, config.spectrum)


@dataclass(frozen=True)
class MockDataset:
    d: Field
    truth_a: Field
    truth_r: float
    truth_response: float
    seed: int = 0

    @property
    def signal_response(self) -> Field:
        return self.truth_response * self.truth_a.exp()


def make_mock_data(config: ModelConfig, seed: int | None = None) -> MockDataset:
    """Sample signal, response perturbation and noise from their priors."""
    seed = config.seed if seed is None else int(seed)
    truth_a = sample_gaussian_field(config.prior, [seed, 0])
    truth_r = float(np.random.default_rng([seed, 1]).standard_normal() * np.sqrt(config.R))
    pixel_sigma = config.sigma_n / np.sqrt(config.grid.pixel_volume)
    noise = np.random.default_rng([seed, 2]).standard_normal(config.grid.n_pixels) * pixel_sigma
    response = truth_r + config.r0
    d = Field(config.grid, response * np.exp(truth_a.values) + noise)
    return MockDataset(d=d, truth_a=truth_a, truth_r=truth_r, truth_response=response, seed=seed)


def hamiltonian(a: Field, r: float, d: Field, config: ModelConfig) -> float:
    """``a^T A^-1 a / 2 + r^2 / 2R + |d - (r + r0) e^a|^2 / 2 sigma_n^2``."""
    prior = config.prior
    residual = d - (r + config.r0) * a.exp()
    return float(
        0.5 * np.dot(a.values, prior.inverse_values(a.values))
        + 0.5 * r * r / config.R
        + 0.5 * inner(residual, residual) / config.sigma_n**2
    )


@dataclass(frozen=True)
class GibbsState:
    """Mean ``(m_r, m_a)`` and covariance blocks of the Gaussian trial posterior."""

    m_a: Field
    m_r: float
    D_aa: np.ndarray
    D_ra: np.ndarray
    D_rr: float
    Daa_diag: Field = field(init=False)

    def __post_init__(self):
        n = self.m_a.grid.n_pixels
        daa = np.array(self.D_aa, dtype=float)
        dra = np.array(self.D_ra, dtype=float).ravel()
        if daa.shape != (n, n) or dra.shape != (n,):
            raise ValueError("covariance block shapes do not match the grid")
        if not np.allclose(daa, daa.T, rtol=0, atol=1e-12 * max(1.0, np.abs(daa).max())):
            raise ValueError("D_aa must be symmetric")
        if not self.D_rr >= 0:
            raise ValueError("D_rr must be non-negative")
        daa = 0.5 * (daa + daa.T)
        daa.setflags(write=False)
        dra.setflags(write=False)
        object.__setattr__(self, "m_r", float(self.m_r))
        object.__setattr__(self, "D_rr", float(self.D_rr))
        object.__setattr__(self, "D_aa", daa)
        object.__setattr__(self, "D_ra", dra)
        object.__setattr__(self, "Daa_diag", Field(self.m_a.grid, np.diag(daa)))

    @property
    def grid(self) -> Grid1D:
        return self.m_a.grid

    @property
    def mean(self) -> np.ndarray:
        return np.concatenate(([self.m_r], self.m_a.values))

    @property
    def joint_cov(self) -> np.ndarray:
        n = self.grid.n_pixels
        out = np.empty((n + 1, n + 1))
        out[0, 0] = self.D_rr
        out[0, 1:] = out[1:, 0] = self.D_ra
        out[1:, 1:] = self.D_aa
        return out

    def with_mean(self, mean) -> GibbsState:
        mean = np.asarray(mean, dtype=float)
        return replace(self, m_r=mean[0], m_a=Field(self.grid, mean[1:]))

    def with_cov(self, cov) -> GibbsState:
        cov = np.asarray(cov, dtype=float)
        return replace(self, D_rr=cov[0, 0], D_ra=cov[1:, 0], D_aa=cov[1:, 1:])

    @classmethod
    def from_joint(cls, grid: Grid1D, mean, cov) -> GibbsState:
        mean = np.asarray(mean, dtype=float)
        cov = np.asarray(cov, dtype=float)
        return cls(Field(grid, mean[1:]), mean[0], cov[1:, 1:], cov[1:, 0], cov[0, 0])

    def check_psd(self, tol: float = 1e-10) -> bool:
        j = self.joint_cov
        return bool(np.linalg.eigvalsh(j).min() >= -tol * max(np.linalg.norm(j, 2), 1e-300))


def prior_state(config: ModelConfig) -> GibbsState:
    """Zero mean with the prior covariance ``blockdiag(R, A)``."""
    a_cov, _ = prior_matrices(config)
    n = config.grid.n_pixels
    return GibbsState(Field.zeros(config.grid), 0.0, a_cov, np.zeros(n), config.R)


@dataclass(frozen=True)
class _Moments:
    """Per-pixel Gaussian moments shared by the energy and its derivatives."""

    lin: np.ndarray  # exp(m_a + Daa/2) = <e^a>
    quad: np.ndarray  # exp(2 m_a + 2 Daa) = <e^{2a}>
    mu: float  # m_r + r0
    lin_resp: np.ndarray  # m_r + r0 + D_ra = tilted mean of r + r0 under e^a
    quad_resp: np.ndarray  # m_r + r0 + 2 D_ra = tilted mean under e^{2a}


def _moments(m_a, m_r, daa_diag, d_ra, config) -> _Moments:
    mu = m_r + config.r0
    with np.errstate(over="ignore"):
        lin = np.exp(m_a + 0.5 * daa_diag)
        quad = np.exp(2.0 * m_a + 2.0 * daa_diag)
    return _Moments(lin, quad, mu, mu + d_ra, mu + 2.0 * d_ra)


def gibbs_terms(state: GibbsState, d: Field, config: ModelConfig) -> dict:
    """The separate contributions to ``G(m, D) = U - S``.

    ``entropy`` is ``-S``; ``prior``, ``data_const``, ``data_linear`` and
    ``data_quadratic`` add up to the internal energy ``U = <H>``.
    """
    if d.grid != state.grid:
        raise ValueError("data and state live on different grids")
    _, a_inv = prior_matrices(config)
    n = config.grid.n_pixels
    try:
        chol = np.linalg.cholesky(state.joint_cov)
    except np.linalg.LinAlgError:
        raise NotPositiveDefiniteError("joint covariance is not positive definite") from None
    logdet = 2.0 * np.sum(np.log(np.diag(chol)))
    w = config.noise_weight
    mo = _moments(state.m_a.values, state.m_r, state.Daa_diag.values, state.D_ra, config)
    ma = state.m_a.values
    return {
        "entropy": -0.5 * ((n + 1) * (1.0 + LOG_2PI) + logdet),
        "prior": 0.5 * (ma @ a_inv @ ma + state.m_r**2 / config.R)
        + 0.5 * (np.sum(a_inv * state.D_aa) + state.D_rr / config.R),
        "data_const": 0.5 * w * float(np.dot(d.values, d.values)),
        "data_linear": -w * float(np.sum(d.values * mo.lin_resp * mo.lin)),
        "data_quadratic": 0.5 * w * float(np.sum(mo.quad * (state.D_rr + mo.quad_resp**2))),
    }


def gibbs_energy(state: GibbsState, d: Field, config: ModelConfig) -> float:
    terms = gibbs_terms(state, d, config)
    with np.errstate(invalid="ignore", over="ignore"):
        return float(sum(terms.values()))


def _energy_scale(state, d, config) -> float:
    return float(sum(abs(v) for v in gibbs_terms(state, d, config).values()))


def _gradient_parts(m_a, m_r, daa_diag, d_ra, d_rr, dv, config):
    _, a_inv = prior_matrices(config)
    w = config.noise_weight
    mo = _moments(m_a, m_r, daa_diag, d_ra, config)
    grad_a = a_inv @ m_a - w * dv * mo.lin_resp * mo.lin + w * mo.quad * (d_rr + mo.quad_resp**2)
    grad_r = m_r / config.R - w * np.sum(dv * mo.lin) + w * np.sum(mo.quad * mo.quad_resp)
    return grad_a, float(grad_r)


def _hessian_parts(m_a, m_r, daa_diag, d_ra, d_rr, dv, config) -> np.ndarray:
    _, a_inv = prior_matrices(config)
    w = config.noise_weight
    mo = _moments(m_a, m_r, daa_diag, d_ra, config)
    n = m_a.size
    hess = np.empty((n + 1, n + 1))
    hess[0, 0] = 1.0 / config.R + w * np.sum(mo.quad)
    hess[0, 1:] = hess[1:, 0] = -w * dv * mo.lin + 2.0 * w * mo.quad * mo.quad_resp
    hess[1:, 1:] = a_inv
    hess[np.arange(1, n + 1), np.arange(1, n + 1)] += -w * dv * mo.lin_resp * mo.lin + 2.0 * w * mo.quad * (
        d_rr + mo.quad_resp**2
    )
    return hess


def grad_gibbs(state: GibbsState, d: Field, config: ModelConfig) -> tuple[Field, float]:
    """``(dG/dm_a, dG/dm_r)`` at fixed covariance."""
    ga, gr = _gradient_parts(
        state.m_a.values, state.m_r, state.Daa_diag.values, state.D_ra, state.D_rr, d.values, config
    )
    return Field(state.grid, ga), gr


def joint_gradient(state: GibbsState, d: Field, config: ModelConfig) -> np.ndarray:
    ga, gr = grad_gibbs(state, d, config)
    return np.concatenate(([gr], ga.values))


def hessian_gibbs(state: GibbsState, d: Field, config: ModelConfig) -> np.ndarray:
    """Joint ``(n+1) x (n+1)`` Hessian of ``G`` in the mean, response first."""
    return _hessian_parts(
        state.m_a.values, state.m_r, state.Daa_diag.values, state.D_ra, state.D_rr, d.values, config
    )


def hamiltonian_gradient(a: Field, r: float, d: Field, config: ModelConfig) -> np.ndarray:
    """Joint gradient of :func:`hamiltonian`, response first."""
    zeros = np.zeros(config.grid.n_pixels)
    ga, gr = _gradient_parts(a.values, r, zeros, zeros, 0.0, d.values, config)
    return np.concatenate(([gr], ga))


def hamiltonian_hessian(a: Field, r: float, d: Field, config: ModelConfig) -> np.ndarray:
    zeros = np.zeros(config.grid.n_pixels)
    return _hessian_parts(a.values, r, zeros, zeros, 0.0, d.values, config)


def damped_cholesky(hess: np.ndarray, start: float = 1e-8):
    """Cholesky factor of ``hess + lam * I`` for the smallest ``lam`` in ``{0, start * 2**k}`` that works."""
    lam = 0.0
    eye = np.eye(hess.shape[0])
    while True:
        try:
            return linalg.cho_factor(hess + lam * eye, lower=True), lam
        except linalg.LinAlgError:
            lam = start if lam == 0.0 else 2.0 * lam
            if lam > 1e300:
                raise


def newton_direction(state: GibbsState, d: Field, config: ModelConfig) -> np.ndarray:
    """Joint Newton direction ``-H^-1 grad`` (Levenberg-damped if needed), response first."""
    factor, _ = damped_cholesky(hessian_gibbs(state, d, config))
    return -linalg.cho_solve(factor, joint_gradient(state, d, config))


def _inverse(hess: np.ndarray) -> np.ndarray:
    factor, _ = damped_cholesky(hess)
    inv = linalg.cho_solve(factor, np.eye(hess.shape[0]))
    return 0.5 * (inv + inv.T)


def _safe(fn, *args) -> float:
    try:
        with np.errstate(over="ignore", invalid="ignore"):
            value = fn(*args)
    except (NotPositiveDefiniteError, FloatingPointError, ValueError):
        return np.inf
    return value if np.isfinite(value) else np.inf


def _rounding(scale: float) -> float:
    return 64.0 * np.finfo(float).eps * scale


@dataclass(frozen=True)
class InferenceResult:
    state: GibbsState
    map_a: Field | None
    map_r: float
    map_sigma_r: float
    gibbs_sigma_r: float
    iterations: int
    converged: bool
    final_grad_norm: float
    energy_history: tuple = ()
    map_converged: bool = True

    def response(self, config: ModelConfig) -> float:
        return self.state.m_r + config.r0

    def map_response(self, config: ModelConfig) -> float:
        return self.map_r + config.r0


def _line_search(objective, gradnorm, x, step, f0, g0, settings, scale):
    """Largest ``t = backtrack**k`` with ``objective(x + t step) <= f0``.

    Once the achievable decrease falls below the rounding level of ``f0`` a
    step is also taken when the energy stays within rounding and the gradient
    norm shrinks; this lets the final iterations reach tight gradient
    tolerances that a pure energy comparison cannot resolve.
    """
    t = 1.0
    tol = _rounding(scale)
    while t >= settings.min_step:
        cand = x + t * step
        fc = objective(cand)
        if fc <= f0:
            return cand, fc, t
        if fc <= f0 + tol and gradnorm(cand) < g0:
            return cand, fc, t
        t *= settings.backtrack
    return x, f0, 0.0


def minimize_gibbs(d: Field, config: ModelConfig, with_map: bool = True, state: GibbsState | None = None) -> InferenceResult:
    """Alternate a damped Newton step in the mean with a covariance refresh ``D <- H^-1``.

    The covariance moves along ``H^-1 - D`` with the same backtracking rule,
    which is a descent direction for ``G`` in ``D``; both half-steps therefore
    never increase the free energy beyond rounding.
    """
    settings = config.newton
    state = prior_state(config) if state is None else state
    energy = gibbs_energy(state, d, config)
    history = [energy]
    converged = False
    gnorm = np.inf
    it = 0
    for it in range(settings.max_iter + 1):
        grad = joint_gradient(state, d, config)
        gnorm = float(np.linalg.norm(grad))
        hess = hessian_gibbs(state, d, config)
        target = _inverse(hess)
        cov = state.joint_cov
        cov_res = float(np.abs(target - cov).max() / np.abs(target).max())
        logger.debug("iter %d  G=%.15g  |grad|=%.3e  cov_res=%.3e", it, energy, gnorm, cov_res)
        if gnorm <= settings.grad_tol and cov_res <= settings.cov_tol:
            converged = True
            break
        if it == settings.max_iter:
            break
        scale = _energy_scale(state, d, config)

        # mean update at fixed covariance
        factor, _ = damped_cholesky(hess)
        step = -linalg.cho_solve(factor, grad)
        fixed = state
        mean, energy, _ = _line_search(
            lambda x: _safe(gibbs_energy, fixed.with_mean(x), d, config),
            lambda x: float(np.linalg.norm(joint_gradient(fixed.with_mean(x), d, config))),
            state.mean,
            step,
            energy,
            gnorm,
            settings,
            scale,
        )
        state = state.with_mean(mean)

        # covariance refresh at the new mean
        target = _inverse(hessian_gibbs(state, d, config))
        delta = target - state.joint_cov
        base = state
        flat, energy, _ = _line_search(
            lambda x: _safe(gibbs_energy, base.with_cov(x.reshape(delta.shape)), d, config),
            lambda x: -np.inf,
            base.joint_cov.ravel(),
            delta.ravel(),
            energy,
            0.0,
            settings,
            scale,
        )
        state = state.with_cov(flat.reshape(delta.shape))
        history.append(energy)

    if not converged:
        logger.warning("Gibbs minimization stopped after %d iterations, |grad|=%.3e", it, gnorm)

    if with_map:
        map_a, map_r, map_sigma, map_ok = _map(d, config)
    else:
        map_a, map_r, map_sigma, map_ok = None, np.nan, np.nan, False
    return InferenceResult(
        state=state,
        map_a=map_a,
        map_r=map_r,
        map_sigma_r=map_sigma,
        gibbs_sigma_r=float(np.sqrt(state.D_rr)),
        iterations=it,
        converged=converged,
        final_grad_norm=gnorm,
        energy_history=tuple(history),
        map_converged=map_ok,
    )


def _map(d: Field, config: ModelConfig):
    settings = config.newton
    n = config.grid.n_pixels
    grid = config.grid

    def objective(x):
        with np.errstate(over="ignore", invalid="ignore"):
            return _safe(hamiltonian, Field(grid, x[1:]), x[0], d, config)

    def grad(x):
        return hamiltonian_gradient(Field(grid, x[1:]), x[0], d, config)

    x = np.zeros(n + 1)
    f = objective(x)
    converged = False
    for _ in range(settings.max_iter + 1):
        g = grad(x)
        gnorm = float(np.linalg.norm(g))
        if gnorm <= settings.grad_tol:
            converged = True
            break
        hess = hamiltonian_hessian(Field(grid, x[1:]), x[0], d, config)
        factor, _ = damped_cholesky(hess)
        step = -linalg.cho_solve(factor, g)
        scale = abs(f) + 0.5 * config.noise_weight * float(np.dot(d.values, d.values))
        x_new, f, t = _line_search(objective, lambda y: float(np.linalg.norm(grad(y))), x, step, f, gnorm, settings, scale)
        if t == 0.0:
            break
        x = x_new
    if not converged:
        logger.warning("MAP minimization did not reach |grad| <= %g", settings.grad_tol)
    hess = hamiltonian_hessian(Field(grid, x[1:]), x[0], d, config)
    sigma_r = float(np.sqrt(_inverse(hess)[0, 0]))
    return Field(grid, x[1:]), float(x[0]), sigma_r, converged


def map_estimate(d: Field, config: ModelConfig) -> tuple[Field, float, float]:
    """Posterior mode of ``(a, r)`` and the Laplace standard deviation of ``r``."""
    map_a, map_r, sigma_r, _ = _map(d, config)
    return map_a, map_r, sigma_r


def posterior_response_mean(state: GibbsState, config: ModelConfig) -> Field:
    """``<(r + r0) e^a>`` per pixel: ``(r0 + m_r + D_ra) exp(m_a + Daa/2)``."""
    values = (config.r0 + state.m_r + state.D_ra) * np.exp(state.m_a.values + 0.5 * state.Daa_diag.values)
    return Field(state.grid, values)


def uncertainty_band(state: GibbsState) -> Field:
    diag = state.Daa_diag.values
    if np.any(diag < 0):
        raise ValueError("negative variance on the diagonal of D_aa")
    return Field(state.grid, np.sqrt(diag))
