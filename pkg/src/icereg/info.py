"""Empirical information matrices and the trace correction.

``I_hat`` averages outer products of per-observation scores, ``J_hat`` is
the average negative Hessian. Their combination ``tr(I_hat J_hat^-1)`` is
the bias correction used by TIC and, scaled, by the ICE objective.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .model import NumericError, _check_theta, _finite_or_raise

__all__ = [
    "InfoMatrices",
    "PenaltyFunction",
    "QuadraticPenalty",
    "SingularInformationError",
    "JITTER_LADDER",
    "empirical_i",
    "empirical_j",
    "information_matrices",
    "penalized_matrices",
    "solve_trace",
    "trace_i_jinv",
]

JITTER_LADDER = (1e-10, 1e-8, 1e-6, 1e-4)
_ASYMMETRY_TOL = 1e-8


class SingularInformationError(np.linalg.LinAlgError):
    """``J_hat`` could not be factorised even after the largest jitter."""

    def __init__(self, condition, detail=""):
        msg = f"information matrix is singular (condition estimate {condition:.3e})"
        super().__init__(msg + (f"; {detail}" if detail else ""))
        self.condition = condition


@dataclass(frozen=True)
class InfoMatrices:
    i_hat: np.ndarray
    j_hat: np.ndarray
    theta_at: np.ndarray
    jitter_used: float = 0.0

    @property
    def p(self):
        return self.i_hat.shape[0]


def _symmetrize(m, name):
    scale = max(np.abs(m).max(), 1.0)
    if np.abs(m - m.T).max() > _ASYMMETRY_TOL * scale:
        raise ValueError(f"{name} is not symmetric; the model Hessian is likely wrong")
    return 0.5 * (m + m.T)


def empirical_i(model, data, theta):
    """Average outer product of per-observation scores."""
    theta = _check_theta(data.x, theta)
    g = _finite_or_raise(model.grad_log_density(data.x, data.y, theta), "gradient")
    return _symmetrize(g.T @ g / data.n, "I_hat")


def empirical_j(model, data, theta):
    """Average negative Hessian of the per-observation log density."""
    theta = _check_theta(data.x, theta)
    j = model.mean_neg_hessian(data.x, data.y, theta)
    if not np.all(np.isfinite(j)):
        # locate the row for the error message
        h = model.hess_log_density(data.x, data.y, theta)
        _finite_or_raise(h, "Hessian")
        raise NumericError("non-finite Hessian")
    return _symmetrize(j, "J_hat")


def information_matrices(model, data, theta):
    theta = _check_theta(data.x, theta)
    return InfoMatrices(empirical_i(model, data, theta), empirical_j(model, data, theta), theta.copy())


class PenaltyFunction:
    """Per-observation penalty ``k_i(theta) <= 0`` with weight ``lam >= 0``.

    Subclasses implement ``value``, ``grad`` and ``hess``; each receives the
    design block ``x`` (penalties may depend on the data) and returns arrays
    with a leading axis of length ``n``.
    """

    def __init__(self, lam):
        if lam < 0:
            raise ValueError(f"penalty weight must be >= 0, got {lam}")
        self.lam = float(lam)

    def value(self, x, theta):
        raise NotImplementedError

    def grad(self, x, theta):
        raise NotImplementedError

    def hess(self, x, theta):
        raise NotImplementedError

    def validate(self, x, theta):
        k = self.value(x, theta)
        bad = np.flatnonzero(k > 0)
        if bad.size:
            raise ValueError(f"penalty k_i must be <= 0; observation {int(bad[0])} has k_i = {k[bad[0]]:.6g}")
        return k


class QuadraticPenalty(PenaltyFunction):
    """``k_i(theta) = -scale * sum(theta[mask] ** 2)``, identical for every row.

    ``scale=1`` matches the ridge objective ``lam * ||theta||^2``; the
    default ``scale=0.5`` makes ``J_lam = J + lam * I`` on the masked block.
    """

    def __init__(self, lam, scale=0.5, mask=None):
        super().__init__(lam)
        self.scale = float(scale)
        self.mask = None if mask is None else np.asarray(mask, dtype=bool)

    def _mask(self, p):
        return np.ones(p, dtype=bool) if self.mask is None else self.mask

    def value(self, x, theta):
        m = self._mask(theta.shape[0])
        return np.full(x.shape[0], -self.scale * float(theta[m] @ theta[m]))

    def grad(self, x, theta):
        m = self._mask(theta.shape[0])
        return np.broadcast_to(-2.0 * self.scale * np.where(m, theta, 0.0), x.shape)

    def hess(self, x, theta):
        m = self._mask(theta.shape[0])
        h = np.diag(-2.0 * self.scale * m.astype(float))
        return np.broadcast_to(h, (x.shape[0],) + h.shape)


def penalized_matrices(model, data, theta, penalty):
    """``I_lam`` and ``J_lam`` of the penalised per-observation terms."""
    theta = _check_theta(data.x, theta)
    if penalty.lam < 0:
        raise ValueError("penalty weight must be >= 0")
    penalty.validate(data.x, theta)
    g = model.grad_log_density(data.x, data.y, theta)
    if penalty.lam > 0:
        g = g + penalty.lam * penalty.grad(data.x, theta)
    g = _finite_or_raise(g, "penalised gradient")
    i_lam = _symmetrize(g.T @ g / data.n, "I_lam")
    j_lam = empirical_j(model, data, theta)
    if penalty.lam > 0:
        j_lam = j_lam - penalty.lam * np.mean(penalty.hess(data.x, theta), axis=0)
    return InfoMatrices(i_lam, _symmetrize(j_lam, "J_lam"), theta.copy())


def _try_solve(j, i):
    try:
        c = scipy.linalg.cho_factor(j, lower=True, check_finite=False)
        return scipy.linalg.cho_solve(c, i, check_finite=False)
    except np.linalg.LinAlgError:
        pass
    # pivoted symmetric-indefinite fallback (Bunch-Kaufman)
    with warnings.catch_warnings():
        warnings.simplefilter("error", scipy.linalg.LinAlgWarning)
        try:
            m = scipy.linalg.solve(j, i, assume_a="sym", check_finite=False)
        except (np.linalg.LinAlgError, scipy.linalg.LinAlgWarning):
            return None
    return m if np.all(np.isfinite(m)) else None


def solve_trace(i_hat, j_hat):
    """Return ``(tr(i_hat j_hat^-1), jitter_used)`` via factor-and-solve.

    Tries ``j_hat`` as given, then ``j_hat + jitter * I`` for each jitter in
    :data:`JITTER_LADDER`.
    """
    i_hat = np.asarray(i_hat, dtype=float)
    j_hat = np.asarray(j_hat, dtype=float)
    if not (np.all(np.isfinite(i_hat)) and np.all(np.isfinite(j_hat))):
        raise SingularInformationError(np.inf, "non-finite information matrix")
    eye = np.eye(j_hat.shape[0])
    for jitter in (0.0,) + JITTER_LADDER:
        m = _try_solve(j_hat + jitter * eye if jitter else j_hat, i_hat)
        if m is not None:
            return float(np.trace(m)), jitter
    raise SingularInformationError(float(np.linalg.cond(j_hat)))


def trace_i_jinv(im, return_jitter=False):
    """Trace correction ``tr(I_hat J_hat^-1)`` for an :class:`InfoMatrices`."""
    tr, jitter = solve_trace(im.i_hat, im.j_hat)
    return (tr, jitter) if return_jitter else tr
