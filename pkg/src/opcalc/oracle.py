"""Brute-force reference values: Monte Carlo, Gauss-Hermite quadrature, finite differences.

Nothing here knows about the operator algebra; these routines only sample or
integrate black-box functions, so they can be used to check it.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .operators import GaussianParams

MC_BATCH = 100_000
MAX_QUADRATURE_DIM = 3


@dataclass(frozen=True)
class OracleEstimate:
    value: float
    stderr: float
    n_samples: int

    def agrees(self, target: float, n_sigma: float = 4.0) -> bool:
        return abs(self.value - target) <= n_sigma * self.stderr + 1e-12 * abs(target)


def gaussian_factor(cov) -> np.ndarray:
    """Matrix L with ``L @ L.T == cov``; Cholesky, with trace-scaled jitter on failure."""
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        pass
    n = cov.shape[0]
    jitter = 1e-12 * max(np.trace(cov), 1e-300) / n
    try:
        return np.linalg.cholesky(cov + jitter * np.eye(n))
    except np.linalg.LinAlgError:
        raise np.linalg.LinAlgError("covariance is not positive semi-definite") from None


def _evaluate(f, samples: np.ndarray, vectorized: bool) -> np.ndarray:
    if vectorized:
        out = np.asarray(f(samples), dtype=float)
    else:
        out = np.array([f(s) for s in samples], dtype=float)
    return np.broadcast_to(out, (samples.shape[0],))


def mc_expectation(
    f: Callable,
    g: GaussianParams,
    n_samples: int = 1_000_000,
    seed: int = 0,
    vectorized: bool = True,
) -> OracleEstimate:
    """Monte-Carlo estimate of ``<f(s)>`` under ``G(s - m, D)``.

    With ``vectorized=True`` ``f`` receives an ``(n_batch, n)`` array of samples
    and must return ``n_batch`` values. Samples are drawn in batches whose
    random streams are derived from ``(seed, batch_index)``, so the result does
    not depend on how the batches are scheduled.
    """
    if n_samples < 100:
        raise ValueError("need at least 100 samples")
    chol = gaussian_factor(g.cov)
    total = 0.0
    total_sq = 0.0
    done = 0
    for batch in itertools.count():
        size = min(MC_BATCH, n_samples - done)
        if size <= 0:
            break
        rng = np.random.default_rng([seed, batch])
        z = rng.standard_normal((size, g.n))
        values = _evaluate(f, g.mean + z @ chol.T, vectorized)
        total += values.sum()
        total_sq += np.dot(values, values)
        done += size
    mean = total / n_samples
    var = max(total_sq / n_samples - mean * mean, 0.0) * n_samples / (n_samples - 1)
    # Exactly constant integrands should report zero error, not rounding noise.
    if var <= 1e-28 * mean * mean:
        var = 0.0
    return OracleEstimate(float(mean), float(np.sqrt(var / n_samples)), n_samples)


def quadrature_expectation(f: Callable, g: GaussianParams, n_nodes: int = 64, vectorized: bool = True) -> float:
    """Tensor-product Gauss-Hermite estimate of ``<f(s)>`` for dimension <= 3."""
    if g.n > MAX_QUADRATURE_DIM:
        raise ValueError(f"quadrature limited to dimension {MAX_QUADRATURE_DIM}, got {g.n}")
    if n_nodes < 64:
        raise ValueError("use at least 64 nodes per axis")
    x, w = np.polynomial.hermite_e.hermegauss(n_nodes)
    w = w / w.sum()
    # Symmetric square root handles semi-definite covariances without jitter.
    evals, evecs = np.linalg.eigh(g.cov)
    root = evecs * np.sqrt(np.clip(evals, 0.0, None))
    grids = np.meshgrid(*([x] * g.n), indexing="ij")
    z = np.stack([gr.ravel() for gr in grids], axis=1)
    weights = np.ones(z.shape[0])
    for gw in np.meshgrid(*([w] * g.n), indexing="ij"):
        weights = weights * gw.ravel()
    samples = g.mean + z @ root.T
    return float(np.dot(weights, _evaluate(f, samples, vectorized)))


def default_steps(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return 1e-5 * (1.0 + np.abs(x))


def finite_diff_gradient(F: Callable, x, h=None) -> np.ndarray:
    """Central differences ``(F(x + h e_i) - F(x - h e_i)) / 2h``; ``h`` scalar or per coordinate."""
    x = np.asarray(x, dtype=float)
    steps = default_steps(x) if h is None else np.broadcast_to(np.asarray(h, dtype=float), x.shape)
    if np.any(steps <= 0):
        raise ValueError("finite-difference step must be positive")
    grad = np.empty(x.size)
    flat = x.ravel()
    for i in range(flat.size):
        e = np.zeros(flat.size)
        e[i] = steps.ravel()[i]
        grad[i] = (F((flat + e).reshape(x.shape)) - F((flat - e).reshape(x.shape))) / (2.0 * e[i])
    return grad.reshape(x.shape)


def finite_diff_jacobian(G: Callable, x, h=None) -> np.ndarray:
    """Central-difference Jacobian of a vector-valued ``G``; row i is d G_i / d x."""
    x = np.asarray(x, dtype=float).ravel()
    steps = default_steps(x) if h is None else np.broadcast_to(np.asarray(h, dtype=float), x.shape)
    cols = []
    for i in range(x.size):
        e = np.zeros(x.size)
        e[i] = steps[i]
        cols.append((np.asarray(G(x + e)) - np.asarray(G(x - e))).ravel() / (2.0 * steps[i]))
    return np.stack(cols, axis=1)
