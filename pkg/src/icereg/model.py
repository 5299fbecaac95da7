"""Likelihood models and the sample quantities built from them.

A model supplies per-observation log densities together with their first
and second derivatives in the parameter vector. Everything downstream
(information matrices, criteria, estimators) is written against that
contract; only the binary logistic model ships.

The logistic model uses the parameterisation

    p(y = 1 | x, theta) = 1 / (1 + exp(x . theta))

so the success probability *decreases* in the linear predictor. This flips
the sign of fitted coefficients relative to most statistics packages.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit, log_expit

__all__ = [
    "Dataset",
    "ModelContract",
    "LogisticModel",
    "NumericError",
    "predict_prob",
    "sample_log_likelihood",
    "score",
    "entropy_estimate",
]


class NumericError(ArithmeticError):
    """A non-finite value turned up while accumulating over observations."""

    def __init__(self, message, row=None):
        super().__init__(message if row is None else f"{message} (row {row})")
        self.row = row


@dataclass(frozen=True)
class Dataset:
    """Design matrix with a leading column of ones, plus binary labels."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x = np.ascontiguousarray(self.x, dtype=float)
        y = np.ascontiguousarray(self.y, dtype=float).ravel()
        if x.ndim != 2 or x.shape[0] < 1 or x.shape[1] < 1:
            raise ValueError(f"x must be a non-empty 2-d array, got shape {x.shape}")
        if y.shape[0] != x.shape[0]:
            raise ValueError(f"x has {x.shape[0]} rows but y has {y.shape[0]} labels")
        if not np.all(x[:, 0] == 1.0):
            raise ValueError("column 0 of x must be the constant 1 intercept regressor")
        if not np.all((y == 0.0) | (y == 1.0)):
            raise ValueError("y may only contain 0 or 1")
        bad = ~np.isfinite(x).all(axis=1)
        if bad.any():
            raise ValueError(f"non-finite regressor in row {int(np.argmax(bad))}")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @property
    def n(self):
        return self.x.shape[0]

    @property
    def p(self):
        return self.x.shape[1]

    def subset(self, rows):
        return Dataset(self.x[rows], self.y[rows])

    @classmethod
    def from_regressors(cls, z, y):
        """Build a dataset from raw regressors, prepending the intercept column."""
        z = np.atleast_2d(np.asarray(z, dtype=float))
        return cls(np.column_stack([np.ones(z.shape[0]), z]), y)


class ModelContract:
    """Per-observation log density with derivatives in ``theta``.

    Subclasses implement the three vectorised per-row methods. ``x`` is an
    ``(n, p)`` block of rows, ``y`` the matching labels; results carry a
    leading axis of length ``n``. The aggregate hooks below have generic
    implementations that models may override with faster closed forms.
    """

    def log_density(self, x, y, theta):
        raise NotImplementedError

    def grad_log_density(self, x, y, theta):
        raise NotImplementedError

    def hess_log_density(self, x, y, theta):
        raise NotImplementedError

    def mean_neg_hessian(self, x, y, theta, chunk=4096):
        """Average of ``-hess_log_density`` over rows, without the full tensor."""
        p = x.shape[1]
        total = np.zeros((p, p))
        for start in range(0, x.shape[0], chunk):
            h = self.hess_log_density(x[start:start + chunk], y[start:start + chunk], theta)
            total -= h.sum(axis=0)
        return total / x.shape[0]


class LogisticModel(ModelContract):
    """Binary logistic regression, ``p(y=1) = 1 / (1 + exp(x . theta))``."""

    def prob(self, x, theta):
        return expit(-(x @ theta))

    def log_density(self, x, y, theta):
        t = x @ theta
        # log p(y=1) = log_expit(-t), log p(y=0) = log_expit(t); both overflow-safe
        return np.where(y == 1.0, log_expit(-t), log_expit(t))

    def residual_and_weight(self, x, y, theta):
        """Return ``(p - y, p (1 - p))``, the scalar factors of grad and -hess."""
        prob = self.prob(x, theta)
        return prob - y, prob * (1.0 - prob)

    def grad_log_density(self, x, y, theta):
        r, _ = self.residual_and_weight(x, y, theta)
        return r[:, None] * x

    def hess_log_density(self, x, y, theta):
        _, w = self.residual_and_weight(x, y, theta)
        r = np.sqrt(w)[:, None] * x
        return -(r[:, :, None] * r[:, None, :])

    def mean_neg_hessian(self, x, y, theta, chunk=None):
        _, w = self.residual_and_weight(x, y, theta)
        return (x.T @ (w[:, None] * x)) / x.shape[0]


def _check_theta(data_or_row, theta):
    theta = np.asarray(theta, dtype=float)
    p = data_or_row.shape[-1]
    if theta.shape != (p,):
        raise ValueError(f"theta has shape {theta.shape}, expected ({p},)")
    if not np.all(np.isfinite(theta)):
        raise ValueError("theta must be finite")
    return theta


def predict_prob(model, row, theta):
    """Probability of label 1 for a single regressor row."""
    row = np.asarray(row, dtype=float)
    theta = _check_theta(row, theta)
    return float(model.prob(row[None, :], theta)[0])


def _finite_or_raise(values, what):
    bad = ~np.isfinite(values)
    if bad.any():
        row = int(np.flatnonzero(bad.reshape(bad.shape[0], -1).any(axis=1))[0])
        raise NumericError(f"non-finite {what}", row=row)
    return values


def sample_log_likelihood(model, data, theta):
    """Average log density over the rows of ``data``."""
    theta = _check_theta(data.x, theta)
    logg = _finite_or_raise(model.log_density(data.x, data.y, theta), "log density")
    return float(np.mean(logg))


def score(model, data, theta):
    """Gradient of :func:`sample_log_likelihood` with respect to ``theta``."""
    theta = _check_theta(data.x, theta)
    g = _finite_or_raise(model.grad_log_density(data.x, data.y, theta), "gradient")
    return g.mean(axis=0)


def entropy_estimate(model, test, theta):
    """Out-of-sample entropy: minus the mean log density on held-out rows.

    Lower is better. Evaluated on a large test set this is a Monte Carlo
    estimate of the cross-entropy between the truth and ``g(.|theta)``.
    """
    return -sample_log_likelihood(model, test, theta)
