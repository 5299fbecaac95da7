"""Information Criterion Estimation.

The estimator minimises the bias-corrected out-of-sample entropy

    F(theta) = -l(theta) + tr(I_hat(theta) J_hat(theta)^-1) / (3 n)

where ``l`` is the average log likelihood and both information matrices are
re-evaluated at every ``theta``. The correction is the TIC trace, scaled by
one third, applied away from the MLE; it vanishes as ``n`` grows so the
estimator stays consistent.
"""
from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Union

import numpy as np
import scipy.linalg

from .baselines import MleConfig, _newton_direction, fit_mle
from .info import SingularInformationError, empirical_i, empirical_j, solve_trace
from .model import LogisticModel, _check_theta, sample_log_likelihood, score
from .results import FitResult

__all__ = [
    "FitConfig",
    "PENALTY_SCALE",
    "fit_ice",
    "ice_gradient",
    "ice_objective",
    "trace_term",
    "trace_term_gradient",
]

PENALTY_SCALE = "trace/(3n)"


@dataclass
class FitConfig:
    max_iters: int = 2000
    grad_tol: float = 1e-6
    fd_step_scale: float = 1e-5
    shrink: float = 0.5
    sufficient_decrease: float = 1e-4
    init: Union[str, np.ndarray] = "mle"
    # "auto" uses the closed form when the model has one, else finite differences
    trace_grad: str = "auto"
    # "hessian" scales the descent direction by J_hat(theta)^-1; "none" is plain steepest descent
    preconditioner: str = "hessian"
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.shrink < 1:
            raise ValueError("shrink must lie in (0, 1)")
        if not 0 < self.sufficient_decrease < 0.5:
            raise ValueError("sufficient_decrease must lie in (0, 0.5)")
        if self.max_iters <= 0 or self.grad_tol <= 0 or self.fd_step_scale <= 0:
            raise ValueError("max_iters, grad_tol and fd_step_scale must be positive")
        if self.trace_grad not in ("auto", "fd", "analytic"):
            raise ValueError(f"unknown trace_grad {self.trace_grad!r}")
        if self.preconditioner not in ("hessian", "none"):
            raise ValueError(f"unknown preconditioner {self.preconditioner!r}")


def trace_term(model, data, theta):
    """Return ``(tr(I_hat J_hat^-1), jitter_used)`` at ``theta``."""
    return solve_trace(empirical_i(model, data, theta), empirical_j(model, data, theta))


def ice_objective(model, data, theta, return_jitter=False):
    theta = _check_theta(data.x, theta)
    tr, jitter = trace_term(model, data, theta)
    value = -sample_log_likelihood(model, data, theta) + tr / (3.0 * data.n)
    return (value, jitter) if return_jitter else value


def _fd_trace_gradient(model, data, theta, fd_step_scale):
    grad = np.empty_like(theta)
    for k in range(theta.size):
        h = fd_step_scale * (1.0 + abs(theta[k]))
        up = theta.copy()
        dn = theta.copy()
        up[k] += h
        dn[k] -= h
        try:
            t_up, _ = trace_term(model, data, up)
            t_dn, _ = trace_term(model, data, dn)
        except SingularInformationError as exc:
            raise SingularInformationError(exc.condition, f"at finite-difference probe k={k}, h={h:.3e}") from exc
        grad[k] = (t_up - t_dn) / (2.0 * h)
    return grad


def _logistic_trace_gradient(model, data, theta):
    """Closed-form gradient of the trace for the logistic model.

    With ``r = p - y`` and ``w = p (1 - p)`` the per-row derivatives are
    ``d r^2/dt = -2 r w`` and ``d w/dt = -(1 - 2p) w``, so
    ``dT/dtheta = X^T c / n`` with
    ``c_i = w_i (-2 r_i x_i' J^-1 x_i + (1 - 2 p_i) x_i' J^-1 I J^-1 x_i)``.
    """
    x = data.x
    r, w = model.residual_and_weight(x, data.y, theta)
    i_hat = empirical_i(model, data, theta)
    j_hat = empirical_j(model, data, theta)
    _, jitter = solve_trace(i_hat, j_hat)
    if jitter:
        j_hat = j_hat + jitter * np.eye(theta.size)
    try:
        c = scipy.linalg.cho_factor(j_hat, lower=True, check_finite=False)
        a = scipy.linalg.cho_solve(c, x.T, check_finite=False)
    except np.linalg.LinAlgError:
        a = scipy.linalg.solve(j_hat, x.T, assume_a="sym", check_finite=False)
    q = np.einsum("ij,ji->i", x, a)
    s = np.einsum("ji,jk,ki->i", a, i_hat, a)
    prob = r + data.y
    coef = w * (-2.0 * r * q + (1.0 - 2.0 * prob) * s)
    return x.T @ coef / data.n


def trace_term_gradient(model, data, theta, fd_step_scale=1e-5, method="auto"):
    """Gradient of ``tr(I_hat J_hat^-1)`` in ``theta``."""
    theta = _check_theta(data.x, theta)
    if method == "analytic" or (method == "auto" and isinstance(model, LogisticModel)):
        if not isinstance(model, LogisticModel):
            raise ValueError("closed-form trace gradient is only available for LogisticModel")
        return _logistic_trace_gradient(model, data, theta)
    return _fd_trace_gradient(model, data, theta, fd_step_scale)


def ice_gradient(model, data, theta, fd_step_scale=1e-5, method="fd", freeze_trace=False):
    """Gradient of :func:`ice_objective`.

    ``method="fd"`` differentiates the trace by central differences with
    per-coordinate step ``fd_step_scale * (1 + |theta_k|)``. ``freeze_trace``
    drops the trace term entirely, leaving ``-score``.
    """
    theta = _check_theta(data.x, theta)
    g = -score(model, data, theta)
    if freeze_trace:
        return g
    return g + trace_term_gradient(model, data, theta, fd_step_scale, method) / (3.0 * data.n)


def _initial_point(model, data, config):
    if isinstance(config.init, str):
        if config.init != "mle":
            raise ValueError(f"unknown init {config.init!r}")
        return fit_mle(model, data, MleConfig()).theta
    return _check_theta(data.x, config.init).copy()


def fit_ice(model, data, config=None):
    """Minimise the ICE objective by preconditioned descent with backtracking."""
    config = config or FitConfig()
    t0 = time.perf_counter()
    theta = _initial_point(model, data, config)
    info = {"penalty_scale": PENALTY_SCALE}
    try:
        fval, jitter = ice_objective(model, data, theta, return_jitter=True)
    except SingularInformationError:
        rng = np.random.default_rng(config.seed)
        theta = theta + 1e-6 * rng.standard_normal(theta.size)
        info["init_perturbed"] = True
        fval, jitter = ice_objective(model, data, theta, return_jitter=True)
    f_init = fval

    def grad(t):
        return ice_gradient(model, data, t, config.fd_step_scale, config.trace_grad)

    g = grad(theta)
    gnorm = float(np.max(np.abs(g)))
    iters = 0
    step0 = 1.0
    converged = gnorm <= config.grad_tol
    while not converged and iters < config.max_iters:
        if config.preconditioner == "hessian":
            d = _newton_direction(empirical_j(model, data, theta), g)
            step = 1.0
        else:
            d = -g
            step = step0
        slope = float(g @ d)
        accepted = False
        for _ in range(200):
            trial = theta + step * d
            try:
                ftrial, jtrial = ice_objective(model, data, trial, return_jitter=True)
            except (SingularInformationError, ValueError, ArithmeticError):
                ftrial = np.nan
            if np.isfinite(ftrial) and ftrial <= fval + config.sufficient_decrease * step * slope:
                accepted = True
                break
            step *= config.shrink
        if not accepted:
            info["stopped"] = "line search failed"
            break
        assert ftrial <= fval
        theta, fval, jitter = trial, ftrial, jtrial
        step0 = step / config.shrink
        iters += 1
        g = grad(theta)
        gnorm = float(np.max(np.abs(g)))
        converged = gnorm <= config.grad_tol
    assert fval <= f_init + 1e-12
    return FitResult(theta, float(fval), gnorm, iters, bool(converged), "ice", jitter_used=jitter,
                     wall_time=time.perf_counter() - t0, info=info)

