"""Synthetic logistic-regression problems with controlled conditioning.

Regressors are correlated Gaussians whose covariance has a uniform random
spectrum in ``[eig_lo, eig_hi]``. A sparse true parameter generates the
labels, with its intercept tuned so that classes are balanced and the
conditional entropy is not too small; problems that cannot meet both
conditions are discarded and redrawn.

Every random quantity comes from a child stream derived from
``(seed, purpose, index)`` so reruns are bit-identical.
"""
from __future__ import annotations

import hashlib
from dataclasses import asdict, dataclass

import numpy as np
from scipy.special import expit, xlogy

from .model import Dataset, LogisticModel

__all__ = [
    "ProblemSpec",
    "Problem",
    "ProblemGenerationError",
    "derive_seed",
    "child_rng",
    "random_covariance",
    "sample_regressors",
    "generate_true_params",
    "adjust_intercept",
    "generate_responses",
    "bernoulli_entropy",
    "make_problem",
]

MAX_ATTEMPTS = 50
_MAX_EIG_REDRAWS = 100
_EIG_GAP = 1e-12


def derive_seed(parent, tag, index=0):
    """Deterministic 64-bit child seed from ``(parent, tag, index)``."""
    digest = hashlib.sha256(f"{int(parent)}|{tag}|{int(index)}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


def child_rng(parent, tag, index=0):
    return np.random.default_rng(derive_seed(parent, tag, index))


@dataclass(frozen=True)
class ProblemSpec:
    p: int
    m: int
    n_train: int
    n_test: int = 100_000
    eig_lo: float = 1e-4
    eig_hi: float = 0.1
    balance_lo: float = 0.35
    balance_hi: float = 0.65
    entropy_floor: float = 0.2
    seed: int = 0
    # standard deviation of the non-zero true slopes
    theta_scale: float = 1.0

    def __post_init__(self):
        if not 0 <= self.m < self.p:
            raise ValueError(f"need 0 <= m < p, got m={self.m}, p={self.p}")
        if not 0 < self.eig_lo < self.eig_hi:
            raise ValueError("need 0 < eig_lo < eig_hi")
        if not 0 < self.balance_lo < self.balance_hi < 1:
            raise ValueError("need 0 < balance_lo < balance_hi < 1")
        if self.entropy_floor <= 0:
            raise ValueError("entropy_floor must be positive")
        if self.theta_scale <= 0:
            raise ValueError("theta_scale must be positive")
        if self.n_train < 1 or self.n_test < 1:
            raise ValueError("sample sizes must be positive")

    @property
    def spec_id(self):
        return f"p{self.p}_m{self.m}_n{self.n_train}"

    def to_dict(self):
        return asdict(self)


class ProblemGenerationError(RuntimeError):
    def __init__(self, spec, attempts):
        super().__init__(f"no acceptable problem after {attempts} attempts for {spec}")
        self.spec = spec


@dataclass
class Problem:
    spec: ProblemSpec
    theta0: np.ndarray
    mu: np.ndarray
    sigma: np.ndarray
    train: Dataset
    test: Dataset
    discarded_attempts: int = 0
    attempt_seed: int = 0

    def fresh_train(self, n, index):
        """A new training set of size ``n`` from the same truth."""
        x = sample_regressors(n, self.mu, self.sigma, child_rng(self.attempt_seed, "fresh-x", index))
        x = np.column_stack([np.ones(n), x])
        y = generate_responses(x, self.theta0, child_rng(self.attempt_seed, "fresh-y", index))
        return Dataset(x, y)


def random_covariance(p, a, b, rng):
    """SPD matrix ``U diag(eigvals) U^T`` with Haar-random orthonormal ``U``.

    Returns ``(sigma, eigvals)``; eigenvalues are i.i.d. uniform on
    ``[a, b]`` and pairwise distinct.
    """
    if p < 1 or not 0 < a < b:
        raise ValueError("need p >= 1 and 0 < a < b")
    q, r = np.linalg.qr(rng.standard_normal((p, p)))
    q = q * np.sign(np.diag(r))
    for _ in range(_MAX_EIG_REDRAWS):
        eigvals = rng.uniform(a, b, size=p)
        gaps = np.diff(np.sort(eigvals))
        if gaps.size == 0 or gaps.min() >= _EIG_GAP:
            break
    else:
        raise RuntimeError("could not draw distinct eigenvalues")
    sigma = (q * eigvals) @ q.T
    return 0.5 * (sigma + sigma.T), eigvals


def sample_regressors(n, mu, sigma, rng):
    """Rows ``mu + L z`` with ``L`` the lower Cholesky factor of ``sigma``."""
    chol = np.linalg.cholesky(sigma)
    z = rng.standard_normal((n, len(mu)))
    return mu + z @ chol.T


def generate_true_params(p, m, rng, scale=1.0):
    """Length ``p + 1`` parameter, intercept first, with ``m`` zero slopes.

    Non-zero slopes are i.i.d. ``N(0, scale^2)``.
    """
    if not 0 <= m < p:
        raise ValueError(f"need 0 <= m < p, got m={m}, p={p}")
    theta = np.zeros(p + 1)
    active = rng.permutation(p)[: p - m] + 1
    theta[np.sort(active)] = scale * rng.standard_normal(p - m)
    return theta


def bernoulli_entropy(prob):
    return -(xlogy(prob, prob) + xlogy(1.0 - prob, 1.0 - prob))


def adjust_intercept(theta0, model, probe_x, spec, tol=1e-6):
    """Tune the intercept so the mean success probability on ``probe_x`` is 1/2.

    ``probe_x`` is a design matrix (intercept column first). Returns the
    adjusted parameter, or ``None`` if the balance or entropy condition
    fails, in which case the caller should discard the draw.
    """
    theta = np.array(theta0, dtype=float)
    slope = probe_x[:, 1:] @ theta[1:]

    def mean_prob(t):
        return float(np.mean(expit(-(slope + t))))

    lo, hi = -50.0, 50.0
    # mean_prob is strictly decreasing in the intercept
    if mean_prob(lo) < 0.5 or mean_prob(hi) > 0.5:
        return None
    mid = 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        mp = mean_prob(mid)
        if abs(mp - 0.5) < tol or hi - lo < 1e-14:
            break
        if mp > 0.5:
            lo = mid
        else:
            hi = mid
    else:
        return None
    theta[0] = mid
    prob = model.prob(probe_x, theta)
    balance = float(prob.mean())
    entropy = float(np.mean(bernoulli_entropy(prob)))
    if abs(balance - 0.5) >= tol or not spec.balance_lo < balance < spec.balance_hi:
        return None
    if not entropy > spec.entropy_floor:
        return None
    return theta


def generate_responses(x, theta0, rng, model=None):
    model = model or LogisticModel()
    prob = model.prob(x, theta0)
    return (rng.random(x.shape[0]) < prob).astype(float)


def make_problem(spec, model=None):
    """Draw a full problem, redrawing discarded attempts with retry seeds."""
    model = model or LogisticModel()
    for attempt in range(MAX_ATTEMPTS):
        seed = spec.seed if attempt == 0 else derive_seed(spec.seed, "retry", attempt)
        sigma, _ = random_covariance(spec.p, spec.eig_lo, spec.eig_hi, child_rng(seed, "cov"))
        mu = child_rng(seed, "mu").standard_normal(spec.p)
        theta0 = generate_true_params(spec.p, spec.m, child_rng(seed, "theta0"), spec.theta_scale)
        test_x = np.column_stack([np.ones(spec.n_test), sample_regressors(spec.n_test, mu, sigma, child_rng(seed, "test-x"))])
        theta0 = adjust_intercept(theta0, model, test_x, spec)
        if theta0 is None:
            continue
        train_x = np.column_stack([np.ones(spec.n_train), sample_regressors(spec.n_train, mu, sigma, child_rng(seed, "train-x"))])
        train = Dataset(train_x, generate_responses(train_x, theta0, child_rng(seed, "train-y"), model))
        test = Dataset(test_x, generate_responses(test_x, theta0, child_rng(seed, "test-y"), model))
        return Problem(spec, theta0, mu, sigma, train, test, attempt, seed)
    raise ProblemGenerationError(spec, MAX_ATTEMPTS)
