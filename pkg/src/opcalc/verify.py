"""Self-checks of the operator engine and the free-energy formulas against brute force.

Each ``check_*`` function returns a :class:`CheckResult`. :func:`run_suite`
runs all of them; ``level="fast"`` caps Monte-Carlo runs at 10^5 samples,
``level="full"`` uses 10^6.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import operators as op
from .config import ModelConfig
from .field import Field, Grid1D, PowerSpectrum
from .general import (
    GeneralState,
    general_terms,
    gibbs_energy_general,
    grad_general,
    hamiltonian_general,
    hessian_general,
)
from .oracle import finite_diff_gradient, finite_diff_jacobian, mc_expectation, quadrature_expectation
from .selfcal import (
    GibbsState,
    gibbs_energy,
    gibbs_terms,
    grad_gibbs,
    hessian_gibbs,
    make_mock_data,
    minimize_gibbs,
    posterior_response_mean,
    prior_matrices,
    uncertainty_band,
)

MC_SAMPLES = {"fast": 100_000, "full": 1_000_000}


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str = ""
    seconds: float = 0.0
    data: dict = field(default_factory=dict, repr=False)

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name:<38s} {self.seconds:7.1f}s  {self.detail}"


def _timed(fn):
    def wrapper(*args, **kwargs):
        t0 = time.perf_counter()
        result = fn(*args, **kwargs)
        result.seconds = time.perf_counter() - t0
        return result

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


def rel_err(a, b) -> float:
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    return float(np.abs(a - b).max() / max(np.abs(b).max(), 1e-300))


def random_gaussian(rng, n, scale=0.5) -> op.GaussianParams:
    b = rng.normal(size=(n, n))
    cov = scale * (b @ b.T) / n + 0.05 * np.eye(n)
    return op.GaussianParams(rng.normal(size=n) * 0.5, cov)


# -- random polynomial x exponential expressions ------------------------------


def random_expression(rng, n: int, max_degree: int = 4, max_exps: int = 2):
    """A random ``coeff * prod(linear forms) * prod(exp(linear forms))``.

    Returns the engine expression and an independent vectorized evaluator.
    """
    degree = int(rng.integers(0, max_degree + 1))
    n_exp = int(rng.integers(0, max_exps + 1))
    coeff = float(rng.normal())
    lin = [(rng.normal(size=n), float(rng.normal())) for _ in range(degree)]
    exps = [rng.uniform(-0.6, 0.6, size=n) for _ in range(n_exp)]
    index_set = op.IndexSet(n)

    expr = op.constant(index_set, coeff)
    # Interleave factors so that annihilators have to cross exponentials.
    factors = [op.linear(index_set, beta, c) for beta, c in lin] + [op.exp_phi(index_set, a) for a in exps]
    order = rng.permutation(len(factors))
    for k in order:
        expr = op.multiply(expr, factors[k])

    def evaluate(s):
        s = np.atleast_2d(s)
        out = np.full(s.shape[0], coeff)
        for beta, c in lin:
            out = out * (s @ beta + c)
        for alpha in exps:
            out = out * np.exp(s @ alpha)
        return out

    desc = f"deg={degree} exps={n_exp}"
    return expr, evaluate, desc


@_timed
def check_engine_oracles(n_mc: int, n_expr: int = 200, seed: int = 20240101) -> CheckResult:
    """Engine expectation vs quadrature (n <= 2, 1e-8 rel) and Monte Carlo (n = 3, 4 stderr)."""
    rng = np.random.default_rng(seed)
    worst_quad = 0.0
    worst_z = 0.0
    failures = []
    for k in range(n_expr):
        n = int(rng.integers(1, 4))
        expr, f, desc = random_expression(rng, n)
        g = random_gaussian(rng, n)
        value = op.expectation(expr, g)
        if n <= 2:
            ref = quadrature_expectation(f, g)
            err = abs(value - ref) / max(abs(ref), 1e-300)
            worst_quad = max(worst_quad, err)
            if err > 1e-8:
                failures.append(f"#{k} n={n} {desc} rel={err:.2e}")
        else:
            est = mc_expectation(f, g, n_samples=n_mc, seed=seed + k)
            # constant integrands give stderr 0; compare those to rounding
            z = abs(value - est.value) / max(est.stderr, 1e-12 * abs(value), 1e-300)
            worst_z = max(worst_z, z)
            if z > 4.0:
                failures.append(f"#{k} n={n} {desc} z={z:.2f}")
    detail = f"{n_expr} exprs, worst quad rel={worst_quad:.1e}, worst MC |z|={worst_z:.2f}"
    if failures:
        detail += "; failed: " + ", ".join(failures[:5])
    return CheckResult("engine vs quadrature/MC", not failures, detail)


@_timed
def check_closed_forms(seed: int = 7) -> CheckResult:
    """Two-point function, exponential swap factor and derivation rule, symbolically and numerically."""
    rng = np.random.default_rng(seed)
    I = op.IndexSet(2)
    g = random_gaussian(rng, 2)
    m, D = g.mean, g.cov
    problems = []
    worst = 0.0

    # <s_x s_y> = m_x m_y + D_xy
    for x in range(2):
        for y in range(2):
            expr = op.multiply(op.phi(I, x), op.phi(I, y))
            scalars = [t for t in expr.terms if not t.b_powers and not t.c_powers and t.b_exponent is None]
            if len(scalars) != 1 or scalars[0].d_factors != ((min(x, y), max(x, y)),) or scalars[0].coeff != 1.0:
                problems.append(f"Phi_{x}Phi_{y} constant term")
            err = rel_err(op.expectation(expr, g), m[x] * m[y] + D[x, y])
            worst = max(worst, err)

    # exp(c_x) exp(b_y) = exp(b_y) exp(c_x) exp(D_xy); exp(c_x) shifts m by D e_x
    for x in range(2):
        for y in range(2):
            ex, ey = np.eye(2)[x], np.eye(2)[y]
            ordered = op.normal_order(op.concat(op.exp_annihilation(I, ex), op.exp_creation(I, ey)))
            (t,) = ordered.terms
            if t.d_exponent != (((min(x, y), max(x, y)), 1.0),) or t.b_exponent != tuple(ey) or t.c_exponent != tuple(ex):
                problems.append(f"swap rule x={x} y={y}")
            shifted = m + D @ ex
            worst = max(worst, rel_err(op.expectation(ordered, g), np.exp(shifted[y])))

    # c_x exp(b_y) = exp(b_y) c_x + D_xy exp(b_y), applied to the test function exp(w.m)
    w = rng.normal(size=2) * 0.5
    for x in range(2):
        for y in range(2):
            ey = np.eye(2)[y]
            lhs = op.normal_order(op.concat(op.annihilation(I, x), op.exp_creation(I, ey)))
            keys_l = sorted((t.d_factors, t.b_exponent, t.c_powers) for t in lhs.terms)
            expected_keys = sorted([((), tuple(ey), (x,)), (((min(x, y), max(x, y)),), tuple(ey), ())])
            if keys_l != expected_keys:
                problems.append(f"derivation rule x={x} y={y}")
            probe = op.multiply(lhs, op.exp_creation(I, w))
            # c_x acting on exp(m_y + w.m) = (D_xy + (D w)_x) exp(m_y + w.m)
            direct = (D[x, y] + (D @ w)[x]) * np.exp(m[y] + w @ m)
            worst = max(worst, rel_err(op.expectation(probe, g), direct))

    ok = not problems and worst <= 1e-12
    detail = f"worst rel={worst:.1e}" + (f"; symbolic mismatch: {', '.join(problems)}" if problems else "")
    return CheckResult("closed-form identities", ok, detail)


# -- self-calibration model ---------------------------------------------------


def random_state(rng, config: ModelConfig, cov_scale: float = 0.1) -> GibbsState:
    n = config.grid.n_pixels
    b = rng.normal(size=(n + 1, n + 1))
    cov = cov_scale * (b @ b.T) / (n + 1) + 0.02 * np.eye(n + 1)
    mean = np.concatenate(([rng.normal() * 0.5], rng.normal(size=n) * 0.5))
    return GibbsState.from_joint(config.grid, mean, cov)


def _selfcal_grad(state, d, config):
    ga, gr = grad_gibbs(state, d, config)
    return np.concatenate(([gr], ga.values))


@_timed
def check_selfcal_derivatives(
    n_states: int = 20, seed: int = 3, grad_fn: Callable | None = None
) -> CheckResult:
    """Analytic gradient (n=32, rel < 1e-6) and Hessian (n=16, rel < 1e-4) vs central differences."""
    grad_fn = grad_fn or _selfcal_grad
    rng = np.random.default_rng(seed)
    worst_g = worst_h = 0.0
    for n, kind in ((32, "grad"), (16, "hess")):
        config = ModelConfig(grid=Grid1D(n))
        for k in range(n_states):
            data = make_mock_data(config, seed=1000 + k)
            state = random_state(rng, config)
            if kind == "grad":
                fd = finite_diff_gradient(lambda x: gibbs_energy(state.with_mean(x), data.d, config), state.mean)
                worst_g = max(worst_g, rel_err(grad_fn(state, data.d, config), fd))
            else:
                fd = finite_diff_jacobian(lambda x: _selfcal_grad(state.with_mean(x), data.d, config), state.mean)
                worst_h = max(worst_h, rel_err(hessian_gibbs(state, data.d, config), fd))
    ok = worst_g < 1e-6 and worst_h < 1e-4
    return CheckResult(
        "selfcal gradient/Hessian vs FD", ok, f"grad rel={worst_g:.1e} (<1e-6), hess rel={worst_h:.1e} (<1e-4)",
        data={"grad": worst_g, "hess": worst_h},
    )


def tiny_config(n: int = 2) -> ModelConfig:
    return ModelConfig(grid=Grid1D(n), spectrum=PowerSpectrum(0.6, 1.0, 2.0), sigma_n=0.4, r0=1.5, R=0.3)


def selfcal_operator_terms(config: ModelConfig, d: Field) -> dict:
    """The internal-energy terms of the scalar-response model as engine expressions.

    Index 0 is the response perturbation ``r``; indices ``1..n`` are pixels.
    """
    n = config.grid.n_pixels
    I = op.IndexSet(n + 1)
    w = config.noise_weight
    _, a_inv = prior_matrices(config)
    phis = [op.phi(I, k) for k in range(n + 1)]
    resp = phis[0] + config.r0
    prior = op.multiply(phis[0], phis[0]).scale(0.5 / config.R)
    linear = op.OperatorExpr(I)
    quadratic = op.OperatorExpr(I)
    for i in range(n):
        for j in range(n):
            prior = prior + op.multiply(phis[i + 1], phis[j + 1]).scale(0.5 * a_inv[i, j])
        unit = np.eye(n + 1)[i + 1]
        signal = op.multiply(resp, op.exp_phi(I, unit))
        linear = linear + signal.scale(-w * d.values[i])
        quadratic = quadratic + op.multiply(signal, signal).scale(0.5 * w)
    return {"prior": prior, "data_linear": linear, "data_quadratic": quadratic}


def selfcal_sample_terms(config: ModelConfig, d: Field) -> dict:
    n = config.grid.n_pixels
    w = config.noise_weight
    _, a_inv = prior_matrices(config)

    def prior(s):
        a = s[:, 1:]
        return 0.5 * np.einsum("si,ij,sj->s", a, a_inv, a) + 0.5 * s[:, 0] ** 2 / config.R

    def linear(s):
        return -w * ((s[:, :1] + config.r0) * np.exp(s[:, 1:])) @ d.values

    def quadratic(s):
        return 0.5 * w * np.sum(((s[:, :1] + config.r0) * np.exp(s[:, 1:])) ** 2, axis=1)

    del n
    return {"prior": prior, "data_linear": linear, "data_quadratic": quadratic}


@_timed
def check_energy_identity(n_mc: int, n_states: int = 3, seed: int = 11) -> CheckResult:
    """Each internal-energy term of G vs the engine (1e-8 rel) and Monte Carlo (4 stderr)."""
    rng = np.random.default_rng(seed)
    config = tiny_config(2)
    worst_rel = worst_z = 0.0
    for k in range(n_states):
        data = make_mock_data(config, seed=200 + k)
        state = random_state(rng, config, cov_scale=0.3)
        terms = gibbs_terms(state, data.d, config)
        g = op.GaussianParams(state.mean, state.joint_cov)
        exprs = selfcal_operator_terms(config, data.d)
        funcs = selfcal_sample_terms(config, data.d)
        for name, expr in exprs.items():
            worst_rel = max(worst_rel, rel_err(terms[name], op.expectation(expr, g)))
            est = mc_expectation(funcs[name], g, n_samples=n_mc, seed=seed * 100 + k)
            worst_z = max(worst_z, abs(terms[name] - est.value) / est.stderr)
    ok = worst_rel <= 1e-8 and worst_z <= 4.0
    return CheckResult("energy identity (scalar response)", ok, f"engine rel={worst_rel:.1e}, MC |z|={worst_z:.2f}")


# -- matrix response ----------------------------------------------------------


def general_problem(rng, n: int = 2):
    nn = n * n
    size = nn + n
    b = rng.normal(size=(size, size))
    D = 0.15 * (b @ b.T) / size + 0.02 * np.eye(size)
    state = GeneralState(rng.normal(size=n) * 0.3, rng.normal(size=(n, n)) * 0.7 + np.eye(n), D)
    A = np.array([[0.8, 0.3], [0.3, 0.8]]) if n == 2 else np.eye(n) * 0.8
    R = np.eye(nn) * 0.5 + 0.05
    Ninv = np.eye(n) * 2.0 + 0.4
    d = rng.normal(size=n) + 1.0
    return state, d, A, R, Ninv


def general_operator_terms(d, Ninv, n: int) -> dict:
    """``-<d^T N^-1 r e^a>`` and ``<(r e^a)^T N^-1 r e^a> / 2`` as engine expressions."""
    nn = n * n
    I = op.IndexSet(nn + n)
    r = lambda j, i: op.phi(I, j * n + i)  # noqa: E731
    ea = [op.exp_phi(I, np.eye(nn + n)[nn + i]) for i in range(n)]
    c = Ninv @ d
    # (r e^a)_j as an operator
    signal = []
    for j in range(n):
        sj = op.OperatorExpr(I)
        for i in range(n):
            sj = sj + op.multiply(r(j, i), ea[i])
        signal.append(sj)
    linear = op.OperatorExpr(I)
    for j in range(n):
        linear = linear + signal[j].scale(-c[j])
    quadratic = op.OperatorExpr(I)
    for k in range(n):
        for j in range(n):
            if Ninv[k, j] != 0.0:
                quadratic = quadratic + op.multiply(signal[k], signal[j]).scale(0.5 * Ninv[k, j])
    return {"data_linear": linear, "data_quadratic": quadratic}


def general_sample_terms(d, Ninv, n: int) -> dict:
    nn = n * n

    def signal(s):
        r = s[:, :nn].reshape(-1, n, n)
        return np.einsum("sji,si->sj", r, np.exp(s[:, nn:]))

    def linear(s):
        return -signal(s) @ (Ninv @ d)

    def quadratic(s):
        x = signal(s)
        return 0.5 * np.einsum("sk,kj,sj->s", x, Ninv, x)

    return {"data_linear": linear, "data_quadratic": quadratic}


@_timed
def check_general_response(n_mc: int, n_states: int = 3, seed: int = 5) -> CheckResult:
    """Matrix-response energy vs engine and MC; both gradients and all Hessian blocks vs FD."""
    rng = np.random.default_rng(seed)
    n = 2
    nn = n * n
    worst = {"engine": 0.0, "mc_z": 0.0, "hamiltonian_z": 0.0, "grad": 0.0, "hess_aa": 0.0, "hess_ar": 0.0, "hess_rr": 0.0}
    for k in range(n_states):
        state, d, A, R, Ninv = general_problem(rng, n)
        terms = general_terms(state, d, A, R, Ninv)
        g = op.GaussianParams(state.mean, state.D)
        exprs = general_operator_terms(d, Ninv, n)
        funcs = general_sample_terms(d, Ninv, n)
        for name, expr in exprs.items():
            worst["engine"] = max(worst["engine"], rel_err(terms[name], op.expectation(expr, g)))
            est = mc_expectation(funcs[name], g, n_samples=n_mc, seed=seed * 100 + k)
            worst["mc_z"] = max(worst["mc_z"], abs(terms[name] - est.value) / est.stderr)

        # full internal energy against the Hamiltonian itself
        a_inv, r_inv = np.linalg.inv(A), np.linalg.inv(R)

        def ham(s):
            a, r = s[:, nn:], s[:, :nn]
            res = d - np.einsum("sji,si->sj", r.reshape(-1, n, n), np.exp(a))
            return 0.5 * (
                np.einsum("si,ij,sj->s", a, a_inv, a)
                + np.einsum("si,ij,sj->s", r, r_inv, r)
                + np.einsum("sk,kj,sj->s", res, Ninv, res)
            )

        probe = state.mean + rng.normal(size=(4, nn + n)) * 0.3
        scalar = [hamiltonian_general(x[nn:], x[:nn], d, A, R, Ninv) for x in probe]
        worst["hamiltonian_form"] = max(worst.get("hamiltonian_form", 0.0), rel_err(ham(probe), scalar))

        u = gibbs_energy_general(state, d, A, R, Ninv) - terms["entropy"]
        est = mc_expectation(ham, g, n_samples=n_mc, seed=seed * 1000 + k)
        worst["hamiltonian_z"] = max(worst["hamiltonian_z"], abs(u - est.value) / est.stderr)

        def joint_grad(x):
            ga, gr = grad_general(state.with_mean(x), d, A, R, Ninv)
            return np.concatenate((gr.ravel(), ga))

        fd = finite_diff_gradient(lambda x: gibbs_energy_general(state.with_mean(x), d, A, R, Ninv), state.mean)
        worst["grad"] = max(worst["grad"], rel_err(joint_grad(state.mean), fd))
        hess = hessian_general(state, d, A, R, Ninv)
        fdh = finite_diff_jacobian(joint_grad, state.mean)
        worst["hess_rr"] = max(worst["hess_rr"], rel_err(hess[:nn, :nn], fdh[:nn, :nn]))
        worst["hess_ar"] = max(worst["hess_ar"], rel_err(hess[:nn, nn:], fdh[:nn, nn:]))
        worst["hess_aa"] = max(worst["hess_aa"], rel_err(hess[nn:, nn:], fdh[nn:, nn:]))
    ok = (
        worst["engine"] <= 1e-8
        and worst["mc_z"] <= 4.0
        and worst["hamiltonian_z"] <= 4.0
        and worst["hamiltonian_form"] <= 1e-12
        and worst["grad"] < 1e-6
        and max(worst["hess_aa"], worst["hess_ar"], worst["hess_rr"]) < 1e-4
    )
    detail = ", ".join(f"{k}={v:.1e}" if "z" not in k else f"{k}={v:.2f}" for k, v in worst.items())
    return CheckResult("matrix response (n=2)", ok, detail, data=worst)


# -- inference runs -----------------------------------------------------------


@_timed
def check_monotone_descent(n_runs: int = 20, config: ModelConfig | None = None) -> CheckResult:
    """Default-config runs: G never increases (beyond rounding) and converges within max_iter."""
    config = config or ModelConfig()
    bad = []
    iters = []
    worst_rise = 0.0
    for seed in range(1, n_runs + 1):
        data = make_mock_data(config, seed)
        res = minimize_gibbs(data.d, config, with_map=False)
        h = np.asarray(res.energy_history)
        rise = float(np.max(np.diff(h) / np.abs(h[1:]))) if h.size > 1 else 0.0
        worst_rise = max(worst_rise, rise)
        iters.append(res.iterations)
        if not res.converged or res.final_grad_norm > config.newton.grad_tol or rise > ENERGY_ROUNDING:
            bad.append(seed)
    detail = f"{n_runs - len(bad)}/{n_runs} ok, iterations {min(iters)}-{max(iters)}, max relative rise {worst_rise:.1e}"
    return CheckResult("monotone descent + convergence", not bad, detail)


# relative rounding level of the free energy: accepted steps may not raise G by more
ENERGY_ROUNDING = 1e-12


def calibration_table(config: ModelConfig, seeds) -> list[dict]:
    rows = []
    for seed in seeds:
        data = make_mock_data(config, seed)
        try:
            res = minimize_gibbs(data.d, config)
        except Exception as exc:  # noqa: BLE001
            rows.append({"seed": seed, "error": repr(exc)})
            continue
        truth = data.truth_response
        gibbs, gsig = res.response(config), res.gibbs_sigma_r
        mp, msig = res.map_response(config), res.map_sigma_r
        rows.append(
            {
                "seed": seed,
                "truth": truth,
                "gibbs": gibbs,
                "gibbs_sigma": gsig,
                "map": mp,
                "map_sigma": msig,
                "gibbs_z": (gibbs - truth) / gsig,
                "map_z": (mp - truth) / msig,
                "converged": res.converged and res.map_converged,
            }
        )
    return rows


@_timed
def check_calibration(n_seeds: int = 20, config: ModelConfig | None = None) -> CheckResult:
    """Response z-scores: mean |z| <= 1.5 and |z| <= 3 in >= 90% of runs, for Gibbs and MAP; mutual agreement."""
    config = config or ModelConfig()
    rows = [r for r in calibration_table(config, range(1, n_seeds + 1)) if "error" not in r]
    need = int(np.ceil(0.9 * n_seeds))
    gz = np.array([r["gibbs_z"] for r in rows])
    mz = np.array([r["map_z"] for r in rows])
    agree = np.array([abs(r["gibbs"] - r["map"]) / np.hypot(r["gibbs_sigma"], r["map_sigma"]) for r in rows])
    ok = (
        len(rows) == n_seeds
        and np.abs(gz).mean() <= 1.5
        and np.abs(mz).mean() <= 1.5
        and (np.abs(gz) <= 3).sum() >= need
        and (np.abs(mz) <= 3).sum() >= need
        and (agree <= 2).sum() >= need
    )
    detail = (
        f"gibbs mean|z|={np.abs(gz).mean():.2f} within3={int((np.abs(gz) <= 3).sum())}/{n_seeds}; "
        f"map mean|z|={np.abs(mz).mean():.2f} within3={int((np.abs(mz) <= 3).sum())}/{n_seeds}; "
        f"agree<=2sig {int((agree <= 2).sum())}/{n_seeds}"
    )
    return CheckResult("calibration (Gibbs and MAP)", ok, detail, data={"rows": rows})


@_timed
def check_figure_pipeline(n_mc: int, seed: int = 17) -> CheckResult:
    """Response mean formula vs Monte Carlo at n=2; band equals sqrt(diag D_aa)."""
    rng = np.random.default_rng(seed)
    config = tiny_config(2)
    worst_z = 0.0
    worst_formula = 0.0
    worst_band = 0.0
    for k in range(3):
        state = random_state(rng, config, cov_scale=0.3)
        mean = posterior_response_mean(state, config).values
        formula = (config.r0 + state.m_r + state.D_ra) * np.exp(state.m_a.values + 0.5 * np.diag(state.D_aa))
        worst_formula = max(worst_formula, rel_err(mean, formula))
        g = op.GaussianParams(state.mean, state.joint_cov)
        for i in range(2):
            est = mc_expectation(lambda s: (s[:, 0] + config.r0) * np.exp(s[:, 1 + i]), g, n_samples=n_mc, seed=seed + 10 * k + i)
            worst_z = max(worst_z, abs(mean[i] - est.value) / est.stderr)
        worst_band = max(worst_band, rel_err(uncertainty_band(state).values, np.sqrt(np.diag(state.D_aa))))
    # same checks on a converged default-size reconstruction
    big = ModelConfig(grid=Grid1D(32))
    data = make_mock_data(big, 1)
    res = minimize_gibbs(data.d, big, with_map=False)
    st = res.state
    formula = (big.r0 + st.m_r + st.D_ra) * np.exp(st.m_a.values + 0.5 * np.diag(st.D_aa))
    worst_formula = max(worst_formula, rel_err(posterior_response_mean(st, big).values, formula))
    worst_band = max(worst_band, rel_err(uncertainty_band(st).values, np.sqrt(np.diag(st.D_aa))))
    ok = worst_formula == 0.0 and worst_band == 0.0 and worst_z <= 4.0
    return CheckResult(
        "figure pipeline (response mean, band)", ok, f"formula diff={worst_formula:.1e}, band diff={worst_band:.1e}, MC |z|={worst_z:.2f}"
    )


def run_suite(level: str = "fast", fault: str | None = None, report=print) -> list[CheckResult]:
    """Run every check; ``fault="gradient"`` corrupts the analytic gradient (negative control)."""
    if level not in MC_SAMPLES:
        raise ValueError(f"level must be one of {sorted(MC_SAMPLES)}")
    n_mc = MC_SAMPLES[level]
    grad_fn = None
    if fault == "gradient":

        def grad_fn(state, d, config):
            g = _selfcal_grad(state, d, config)
            return g * (1.0 + 1e-3)

    elif fault is not None:
        raise ValueError(f"unknown fault {fault!r}")

    checks = [
        lambda: check_engine_oracles(n_mc),
        check_closed_forms,
        lambda: check_selfcal_derivatives(grad_fn=grad_fn),
        lambda: check_energy_identity(n_mc),
        lambda: check_general_response(n_mc),
        check_monotone_descent,
        check_calibration,
        lambda: check_figure_pipeline(n_mc),
    ]
    results = []
    for check in checks:
        res = check()
        results.append(res)
        if report is not None:
            report(res.line())
    return results
