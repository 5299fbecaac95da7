"""AIC, TIC and RIC, plus Monte Carlo cross-entropy / KL estimates."""
from __future__ import annotations

import json
import warnings
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from .info import information_matrices, penalized_matrices, trace_i_jinv
from .model import _check_theta, entropy_estimate, score

__all__ = [
    "CriterionReport",
    "StationarityWarning",
    "aic",
    "tic",
    "ric",
    "cross_entropy_and_kl",
]

STATIONARITY_TOL = 1e-4


class StationarityWarning(UserWarning):
    """The criterion was evaluated away from a stationary point."""


@dataclass(frozen=True)
class CriterionReport:
    name: str
    value: float
    loglik_sum: float
    correction: float
    n: int
    p: int
    lambda_: Optional[float] = None

    def check(self, tol=1e-10):
        expected = -2.0 * (self.loglik_sum - self.correction)
        return abs(self.value - expected) <= tol * max(1.0, abs(expected))

    def to_dict(self):
        d = asdict(self)
        d["lambda"] = d.pop("lambda_")
        return d

    def to_json(self):
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["lambda_"] = d.pop("lambda", None)
        return cls(**d)


def _report(name, loglik_sum, correction, n, p, lam=None):
    loglik_sum = float(loglik_sum)
    correction = float(correction)
    return CriterionReport(name, -2.0 * (loglik_sum - correction), loglik_sum, correction, int(n), int(p), lam)


def _warn_if_not_stationary(grad, what):
    norm = float(np.max(np.abs(grad)))
    if norm > STATIONARITY_TOL:
        warnings.warn(f"{what} has sup-norm {norm:.3e} > {STATIONARITY_TOL}; "
                      "criterion assumes a stationary point", StationarityWarning, stacklevel=3)


def aic(model, data, theta_hat):
    theta_hat = _check_theta(data.x, theta_hat)
    _warn_if_not_stationary(score(model, data, theta_hat), "score")
    loglik_sum = float(np.sum(model.log_density(data.x, data.y, theta_hat)))
    return _report("AIC", loglik_sum, data.p, data.n, data.p)


def tic(model, data, theta_hat, info=None):
    """Takeuchi's criterion at ``theta_hat``.

    ``info`` substitutes precomputed matrices, e.g. ``InfoMatrices(I, I, ...)``
    to force the correction to ``p``.
    """
    theta_hat = _check_theta(data.x, theta_hat)
    _warn_if_not_stationary(score(model, data, theta_hat), "score")
    if info is None:
        info = information_matrices(model, data, theta_hat)
    loglik_sum = float(np.sum(model.log_density(data.x, data.y, theta_hat)))
    return _report("TIC", loglik_sum, trace_i_jinv(info), data.n, data.p)


def ric(model, data, theta_lambda, penalty):
    """Regularised criterion for a penalised fit.

    The log likelihood term is the penalised *sum*
    ``sum_i log g_i + lam * sum_i k_i``, kept on the same scale as AIC/TIC.
    """
    theta_lambda = _check_theta(data.x, theta_lambda)
    k = penalty.validate(data.x, theta_lambda)
    pen_score = score(model, data, theta_lambda)
    if penalty.lam > 0:
        pen_score = pen_score + penalty.lam * np.mean(penalty.grad(data.x, theta_lambda), axis=0)
    _warn_if_not_stationary(pen_score, "penalised score")
    info = penalized_matrices(model, data, theta_lambda, penalty)
    loglik_sum = float(np.sum(model.log_density(data.x, data.y, theta_lambda)))
    if penalty.lam > 0:
        loglik_sum += penalty.lam * float(np.sum(k))
    return _report("RIC", loglik_sum, trace_i_jinv(info), data.n, data.p, penalty.lam)


def cross_entropy_and_kl(model, test, theta, theta0):
    """Return ``(H(f, g_theta), H(f, f), KL)`` estimated on ``test``.

    ``test`` must be drawn from the ``theta0`` model so that ``g_theta0``
    plays the role of the true density.
    """
    h_fg = entropy_estimate(model, test, theta)
    h_ff = entropy_estimate(model, test, theta0)
    return h_fg, h_ff, h_fg - h_ff
