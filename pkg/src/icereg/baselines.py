"""Comparison estimators: maximum likelihood, ridge and lasso.

Ridge and lasso pick their weight by k-fold cross-validation on
out-of-fold entropy, the same yardstick the experiments use.
"""
from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .info import empirical_j
from .model import entropy_estimate, sample_log_likelihood, score
from .results import FitResult

__all__ = [
    "CvConfig",
    "MleConfig",
    "SeparationError",
    "cross_validate",
    "fit_l1",
    "fit_l2",
    "fit_mle",
    "fit_penalized",
    "l1_objective",
    "l2_objective",
    "penalty_mask",
    "soft_threshold",
    "write_cv_curve",
]

# coordinates beyond this are probed for divergence; logistic loss underflows
# the score below grad_tol long before |theta| reaches 50
SEPARATION_BOUND = 5.0


class SeparationError(RuntimeError):
    """The likelihood keeps increasing as a coefficient diverges."""

    def __init__(self, coord, value):
        super().__init__(f"perfect separation suspected: theta[{coord}] = {value:.4g} and still growing")
        self.coord = coord


@dataclass
class MleConfig:
    max_iters: int = 200
    grad_tol: float = 1e-8
    shrink: float = 0.5
    sufficient_decrease: float = 1e-4


def default_lambda_grid():
    return np.logspace(-5.0, 1.0, 25)


@dataclass
class CvConfig:
    folds: int = 10
    lambda_grid: np.ndarray = field(default_factory=default_lambda_grid)
    fold_seed: int = 0
    shrink_intercept: bool = False

    def __post_init__(self):
        self.lambda_grid = np.atleast_1d(np.asarray(self.lambda_grid, dtype=float))
        if self.folds < 2:
            raise ValueError("need at least two folds")
        if self.lambda_grid.size == 0 or np.any(self.lambda_grid < 0) or not np.all(np.isfinite(self.lambda_grid)):
            raise ValueError("lambda grid must be non-empty, finite and >= 0")


def penalty_mask(p, shrink_intercept=False):
    mask = np.ones(p, dtype=bool)
    mask[0] = shrink_intercept
    return mask


def soft_threshold(z, lam):
    """Proximal map of ``lam * |.|``: ``sign(z) * max(|z| - lam, 0)``."""
    z = np.asarray(z, dtype=float)
    return np.sign(z) * np.maximum(np.abs(z) - lam, 0.0)


def l2_objective(model, data, theta, lam, mask):
    return -sample_log_likelihood(model, data, theta) + lam * float(np.sum(theta[mask] ** 2))


def l1_objective(model, data, theta, lam, mask):
    return -sample_log_likelihood(model, data, theta) + lam * float(np.sum(np.abs(theta[mask])))


def _newton_direction(h, g):
    try:
        c = scipy.linalg.cho_factor(h, lower=True, check_finite=False)
        d = -scipy.linalg.cho_solve(c, g, check_finite=False)
        if np.all(np.isfinite(d)) and d @ g < 0:
            return d
    except np.linalg.LinAlgError:
        pass
    return -g


def _smooth_newton(model, data, lam, mask, theta, config):
    """Damped Newton on ``-l(theta) + lam * ||theta[mask]||^2``."""
    two_lam = 2.0 * lam * mask.astype(float)

    def f(t):
        return l2_objective(model, data, t, lam, mask)

    fval = f(theta)
    it = 0
    converged = False
    for it in range(1, config.max_iters + 1):
        g = -score(model, data, theta) + two_lam * theta
        if np.max(np.abs(g)) <= config.grad_tol:
            converged = True
            it -= 1
            break
        h = empirical_j(model, data, theta) + np.diag(two_lam)
        d = _newton_direction(h, g)
        slope = float(g @ d)
        step = 1.0
        while step > 1e-20:
            trial = theta + step * d
            ftrial = f(trial)
            if np.isfinite(ftrial) and ftrial <= fval + config.sufficient_decrease * step * slope:
                break
            step *= config.shrink
        else:
            break
        theta, fval = trial, ftrial
    g = -score(model, data, theta) + two_lam * theta
    gnorm = float(np.max(np.abs(g)))
    converged = converged or gnorm <= config.grad_tol
    return theta, fval, gnorm, it, converged


def _check_separation(f, theta, converged):
    """Raise if a large coordinate can still grow while ``f`` keeps falling.

    A finite minimiser is unique for logistic loss, so doubling ``theta`` or
    its largest coordinate can only increase ``f`` there.
    """
    k = int(np.argmax(np.abs(theta)))
    if abs(theta[k]) <= SEPARATION_BOUND:
        return
    bumped = theta.copy()
    bumped[k] *= 2.0
    f0 = f(theta)
    if not converged or f(2.0 * theta) < f0 or f(bumped) < f0:
        raise SeparationError(k, float(theta[k]))


def fit_mle(model, data, config=None, theta_init=None):
    """Maximum likelihood by damped Newton with backtracking."""
    config = config or MleConfig()
    t0 = time.perf_counter()
    theta = np.zeros(data.p) if theta_init is None else np.array(theta_init, dtype=float)
    mask = np.zeros(data.p, bool)
    theta, fval, gnorm, iters, converged = _smooth_newton(model, data, 0.0, mask, theta, config)
    _check_separation(lambda t: l2_objective(model, data, t, 0.0, mask), theta, converged)
    return FitResult(theta, fval, gnorm, iters, converged, "mle", wall_time=time.perf_counter() - t0)


def _pseudo_gradient(g, theta, lam, mask):
    pg = g.copy()
    pos = mask & (theta > 0)
    neg = mask & (theta < 0)
    zero = mask & (theta == 0)
    pg[pos] += lam
    pg[neg] -= lam
    right = g + lam
    left = g - lam
    pg[zero] = np.where(right[zero] < 0, right[zero], np.where(left[zero] > 0, left[zero], 0.0))
    return pg


def _owl_newton(model, data, lam, mask, theta, config):
    """Orthant-wise Newton for ``-l(theta) + lam * ||theta[mask]||_1``.

    Each step fixes the orthant picked by the pseudo-gradient and takes a
    Newton step on the free coordinates, truncated where the first
    coordinate would change sign (that coordinate is then set to zero).
    """
    def f(t):
        return l1_objective(model, data, t, lam, mask)

    fval = f(theta)
    it = 0
    converged = False
    for it in range(1, config.max_iters + 1):
        g = -score(model, data, theta)
        pg = _pseudo_gradient(g, theta, lam, mask)
        if np.max(np.abs(pg)) <= config.grad_tol:
            converged = True
            it -= 1
            break
        orthant = np.where(theta != 0, np.sign(theta), -np.sign(pg))
        free = ~mask | (orthant != 0)
        h = empirical_j(model, data, theta)
        while True:
            d = np.zeros_like(theta)
            d[free] = _newton_direction(h[np.ix_(free, free)], pg[free])
            # a coordinate leaving zero must move against its pseudo-gradient
            wrong = mask & (theta == 0) & free & (d * pg >= 0)
            if not wrong.any():
                break
            free &= ~wrong
        if d @ pg >= 0:
            d = -pg
        # stop at the first sign change instead of projecting past it
        crossing = mask & (theta != 0) & (d * theta < 0)
        ratios = np.full(theta.size, np.inf)
        ratios[crossing] = -theta[crossing] / d[crossing]
        boundary = float(ratios.min())
        step = min(1.0, boundary)
        accepted = False
        while step > 1e-20:
            trial = theta + step * d
            if step == boundary:
                trial[ratios <= boundary] = 0.0
            ftrial = f(trial)
            if np.isfinite(ftrial) and ftrial <= fval + config.sufficient_decrease * float(pg @ (trial - theta)):
                accepted = True
                break
            step *= config.shrink
        if not accepted:
            break
        theta, fval = trial, ftrial
    pg = _pseudo_gradient(-score(model, data, theta), theta, lam, mask)
    gnorm = float(np.max(np.abs(pg)))
    return theta, fval, gnorm, it, converged or gnorm <= config.grad_tol


def _ista(model, data, lam, mask, theta, config, max_iters=200_000):
    """Proximal gradient (iterative soft-thresholding) with backtracking."""
    def smooth(t):
        return -sample_log_likelihood(model, data, t)

    step = 1.0
    it = 0
    for it in range(1, max_iters + 1):
        fs = smooth(theta)
        g = -score(model, data, theta)
        while True:
            z = theta - step * g
            trial = np.where(mask, soft_threshold(z, step * lam), z)
            diff = trial - theta
            if smooth(trial) <= fs + g @ diff + diff @ diff / (2.0 * step) + 1e-15:
                break
            step *= config.shrink
        theta = trial
        if np.max(np.abs(diff)) / step <= config.grad_tol:
            break
        step /= config.shrink  # let the step grow back
    pg = _pseudo_gradient(-score(model, data, theta), theta, lam, mask)
    gnorm = float(np.max(np.abs(pg)))
    return theta, l1_objective(model, data, theta, lam, mask), gnorm, it, gnorm <= 1e-5


def fit_penalized(model, data, lam, kind, shrink_intercept=False, config=None, solver="newton", theta_init=None):
    """Fit at a fixed penalty weight. ``kind`` is ``"l1"`` or ``"l2"``.

    Lasso fits start from the MLE when ``theta_init`` is not given (zeros
    if the MLE does not exist).
    """
    config = config or MleConfig()
    mask = penalty_mask(data.p, shrink_intercept)
    if theta_init is None and kind == "l1" and lam > 0:
        try:
            theta_init = fit_mle(model, data, config).theta
        except SeparationError:
            theta_init = None
    theta = np.zeros(data.p) if theta_init is None else np.array(theta_init, dtype=float)
    t0 = time.perf_counter()
    if kind == "l2":
        out = _smooth_newton(model, data, float(lam), mask, theta, config)
    elif kind == "l1":
        if solver == "ista":
            out = _ista(model, data, float(lam), mask, theta, config)
        else:
            out = _owl_newton(model, data, float(lam), mask, theta, config)
    else:
        raise ValueError(f"unknown penalty kind {kind!r}")
    theta, fval, gnorm, iters, converged = out
    if lam == 0:
        _check_separation(lambda t: l2_objective(model, data, t, 0.0, mask), theta, converged)
    return FitResult(theta, fval, gnorm, iters, converged, kind, wall_time=time.perf_counter() - t0, lambda_=float(lam))


def _fold_ids(n, folds, seed):
    perm = np.random.default_rng(seed).permutation(n)
    ids = np.empty(n, dtype=int)
    ids[perm] = np.arange(n) % folds
    return ids


def _single_class(y):
    return y.size == 0 or np.all(y == y[0])


def cross_validate(model, data, cv, penalty_kind, config=None):
    """K-fold CV over ``cv.lambda_grid``.

    Returns ``(best_lambda, curve)`` where ``curve`` lists
    ``(lambda, mean_entropy, std_entropy)`` in increasing lambda order.
    Ties in mean entropy go to the larger lambda.
    """
    if data.n < cv.folds:
        raise ValueError(f"{data.n} rows cannot be split into {cv.folds} folds")
    seed = cv.fold_seed
    for attempt in range(2):
        ids = _fold_ids(data.n, cv.folds, seed)
        if not any(_single_class(data.y[ids == k]) or _single_class(data.y[ids != k]) for k in range(cv.folds)):
            break
        seed = int(np.random.SeedSequence([cv.fold_seed, attempt + 1]).generate_state(1)[0])
    else:
        raise ValueError("cross-validation fold contains a single class even after refolding")

    grid = np.sort(cv.lambda_grid)
    unique = np.unique(grid)
    scores = np.empty((unique.size, cv.folds))
    for k in range(cv.folds):
        train = data.subset(ids != k)
        valid = data.subset(ids == k)
        start = None
        if penalty_kind == "l1":
            try:
                start = fit_mle(model, train, config).theta
            except SeparationError:
                start = np.zeros(data.p)
        for j, lam in enumerate(unique):
            fit = fit_penalized(model, train, lam, penalty_kind, cv.shrink_intercept, config, theta_init=start)
            scores[j, k] = entropy_estimate(model, valid, fit.theta)
    mean = scores.mean(axis=1)
    std = scores.std(axis=1, ddof=1)
    best = float(unique[np.flatnonzero(mean == mean.min())[-1]])
    lookup = {lam: j for j, lam in enumerate(unique)}
    curve = [(float(lam), float(mean[lookup[lam]]), float(std[lookup[lam]])) for lam in grid]
    return best, curve


def _fit_cv(model, data, cv, kind, config):
    cv = cv or CvConfig()
    t0 = time.perf_counter()
    best, curve = cross_validate(model, data, cv, kind, config)
    fit = fit_penalized(model, data, best, kind, cv.shrink_intercept, config)
    fit.wall_time = time.perf_counter() - t0
    fit.info["cv_curve"] = curve
    return fit


def fit_l2(model, data, cv=None, config=None):
    """Ridge fit, ``-l(theta) + lam * ||theta||^2``, lambda chosen by CV."""
    return _fit_cv(model, data, cv, "l2", config)


def fit_l1(model, data, cv=None, config=None):
    """Lasso fit, ``-l(theta) + lam * ||theta||_1``, lambda chosen by CV."""
    return _fit_cv(model, data, cv, "l1", config)


def write_cv_curve(path, curve):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["lambda", "mean_entropy", "std_entropy"])
        for lam, m, s in curve:
            w.writerow([repr(lam), repr(m), repr(s)])
