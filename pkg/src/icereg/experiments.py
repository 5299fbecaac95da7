"""Monte Carlo studies comparing ICE with MLE, ridge and lasso.

Three studies are provided:

``compare``
    For every grid cell and replication draw a fresh problem, fit each
    estimator on the training set and report the entropy error against the
    MLE on the shared test set, aggregated into paired t-statistics.
``converge``
    Fix a handful of problems and refit on growing training sets, tracking
    the entropy error against the truth.
``variance-ratio``
    Repeated fits at a fixed truth; compares the spread of ICE and MLE
    estimates around it.

Each replication is a pure function of ``(config, base_seed, index)``;
results are written in index order, independent of worker scheduling.
"""
from __future__ import annotations

import hashlib
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .baselines import CvConfig, fit_l1, fit_l2, fit_mle
from .ice import FitConfig, fit_ice
from .io import write_table
from .model import LogisticModel, entropy_estimate
from .synthetic import ProblemSpec, child_rng, derive_seed, make_problem

__all__ = [
    "ESTIMATORS",
    "REFERENCE_C",
    "ExperimentConfig",
    "EstimatorOutcome",
    "ReplicationReport",
    "CellSummary",
    "entropy_error",
    "fit_estimator",
    "summarize",
    "covariance_ratio",
    "run_compare",
    "run_converge",
    "run_variance_ratio",
    "run_study",
    "config_hash",
]

ESTIMATORS = ("mle", "l1", "l2", "ice")
REFERENCE_C = 1.0 / 9.0
DEFAULT_TRAIN_SIZES = (500, 1000, 2000, 5000, 10_000, 20_000, 50_000, 100_000)
T_STAT_NOTE = "t_stat = mean_delta / (std_delta / sqrt(r_effective)); paired by replication; std with ddof=1"

REPORT_COLUMNS = ["spec_id", "rep", "seed", "estimator", "lambda", "H_test", "delta_vs_mle",
                  "delta_vs_theta0", "converged", "jitter_used", "wall_ms", "error"]
SUMMARY_COLUMNS = ["spec_id", "estimator", "mean_delta", "std_delta", "t_stat", "r_effective", "unreliable_flag"]
CONVERGE_COLUMNS = ["n", "H_theta0", "delta_mle", "delta_l2", "delta_ice"]


@dataclass
class ExperimentConfig:
    study: str = "compare"
    grid: list = field(default_factory=lambda: [(5, 2, 500)])
    replications: int = 100
    estimators: tuple = ESTIMATORS
    base_seed: int = 0
    out_dir: Optional[str] = None
    parallelism: int = 1
    n_test: int = 100_000
    train_sizes: tuple = DEFAULT_TRAIN_SIZES
    problems: int = 10
    bootstrap: int = 1000
    folds: int = 10
    shrink_intercept: bool = False
    theta_scale: float = 1.0
    record_timing: bool = False

    def __post_init__(self):
        if self.study not in ("compare", "converge", "variance-ratio"):
            raise ValueError(f"unknown study {self.study!r}")
        self.grid = [tuple(int(v) for v in cell) for cell in self.grid]
        if not self.grid:
            raise ValueError("grid must contain at least one cell")
        self.estimators = tuple(self.estimators)
        unknown = set(self.estimators) - set(ESTIMATORS)
        if unknown or not self.estimators:
            raise ValueError(f"unknown estimators {sorted(unknown)}")
        if self.replications < 2:
            raise ValueError("need at least two replications")
        self.train_sizes = tuple(int(n) for n in self.train_sizes)
        if self.parallelism < 1:
            raise ValueError("parallelism must be >= 1")

    def spec(self, cell, seed):
        p, m, n = cell
        return ProblemSpec(p, m, n, n_test=self.n_test, seed=seed, theta_scale=self.theta_scale)

    def hashed_fields(self):
        d = asdict(self)
        for k in ("out_dir", "parallelism", "record_timing"):
            d.pop(k)
        return d


def config_hash(config):
    blob = json.dumps(config.hashed_fields(), sort_keys=True, default=list)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass
class EstimatorOutcome:
    estimator: str
    theta: Optional[np.ndarray] = None
    lambda_: Optional[float] = None
    h_test: Optional[float] = None
    delta_vs_mle: Optional[float] = None
    delta_vs_theta0: Optional[float] = None
    converged: Optional[bool] = None
    jitter_used: Optional[float] = None
    wall_ms: Optional[float] = None
    error: Optional[str] = None


@dataclass
class ReplicationReport:
    spec_id: str
    rep: int
    seed: int
    outcomes: list
    discarded_attempts: int = 0
    test_hash: str = ""

    def outcome(self, name):
        for o in self.outcomes:
            if o.estimator == name:
                return o
        raise KeyError(name)


@dataclass
class CellSummary:
    spec_id: str
    estimator: str
    mean_delta: Optional[float]
    std_delta: Optional[float]
    t_stat: Optional[float]
    r_effective: int
    unreliable_flag: bool
    errors: int = 0


def entropy_error(model, test, theta, theta_ref):
    """Difference of held-out entropies; negative means ``theta`` is better."""
    return entropy_estimate(model, test, theta) - entropy_estimate(model, test, theta_ref)


def dataset_hash(data):
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(data.x).tobytes())
    h.update(np.ascontiguousarray(data.y).tobytes())
    return h.hexdigest()


def fit_estimator(name, model, data, seed, folds=10, shrink_intercept=False):
    """Dispatch one estimator with seeds derived from ``seed``."""
    if name == "mle":
        return fit_mle(model, data)
    if name in ("l1", "l2"):
        cv = CvConfig(folds=folds, fold_seed=derive_seed(seed, "cv"), shrink_intercept=shrink_intercept)
        return (fit_l1 if name == "l1" else fit_l2)(model, data, cv)
    if name == "ice":
        return fit_ice(model, data, FitConfig(seed=derive_seed(seed, "ice")))
    raise ValueError(f"unknown estimator {name!r}")


def _evaluate(name, model, problem, seed, config, mle_theta, test_hash):
    out = EstimatorOutcome(name)
    t0 = time.perf_counter()
    try:
        fit = fit_estimator(name, model, problem.train, seed, config.folds, config.shrink_intercept)
    except Exception as exc:  # recorded, excluded from the cell statistics
        out.error = type(exc).__name__
        return out
    out.wall_ms = (time.perf_counter() - t0) * 1e3 if config.record_timing else None
    assert dataset_hash(problem.test) == test_hash
    out.theta = fit.theta
    out.lambda_ = fit.lambda_
    out.converged = fit.converged
    out.jitter_used = fit.jitter_used
    out.h_test = entropy_estimate(model, problem.test, fit.theta)
    out.delta_vs_theta0 = out.h_test - entropy_estimate(model, problem.test, problem.theta0)
    if mle_theta is not None:
        out.delta_vs_mle = entropy_error(model, problem.test, fit.theta, mle_theta)
    return out


def _compare_replication(args):
    config, cell, rep = args
    model = LogisticModel()
    seed = derive_seed(config.base_seed, "rep:{}:{}:{}".format(*cell), rep)
    spec = config.spec(cell, seed)
    try:
        problem = make_problem(spec, model)
    except Exception as exc:
        outcomes = [EstimatorOutcome(name, error=type(exc).__name__) for name in config.estimators]
        return ReplicationReport(spec.spec_id, rep, seed, outcomes)
    test_hash = dataset_hash(problem.test)
    mle = _evaluate("mle", model, problem, seed, config, None, test_hash)
    if mle.error is None:
        mle.delta_vs_mle = 0.0
    outcomes = []
    for name in config.estimators:
        if name == "mle":
            outcomes.append(mle)
        else:
            o = _evaluate(name, model, problem, seed, config, mle.theta, test_hash)
            if mle.error is not None and o.error is None:
                o.error = "reference:" + mle.error
            outcomes.append(o)
    return ReplicationReport(spec.spec_id, rep, seed, outcomes, problem.discarded_attempts, test_hash)


def _map(func, jobs, parallelism):
    if parallelism <= 1:
        return [func(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=parallelism) as pool:
        return list(pool.map(func, jobs))


def summarize(reports, estimators, replications):
    """Aggregate per-cell paired statistics from replication reports."""
    cells = {}
    for r in reports:
        cells.setdefault(r.spec_id, []).append(r)
    out = []
    for spec_id, reps in cells.items():
        for name in estimators:
            deltas = [r.outcome(name).delta_vs_mle for r in reps if r.outcome(name).error is None]
            deltas = np.array([d for d in deltas if d is not None], dtype=float)
            k = deltas.size
            errors = len(reps) - k
            mean = float(deltas.mean()) if k else None
            std = float(deltas.std(ddof=1)) if k >= 2 else None
            t = mean / (std / math.sqrt(k)) if std else None
            out.append(CellSummary(spec_id, name, mean, std, t, k, errors > 0.1 * replications, errors))
    return out


def _report_rows(reports):
    for r in reports:
        for o in r.outcomes:
            yield {"spec_id": r.spec_id, "rep": r.rep, "seed": r.seed, "estimator": o.estimator,
                   "lambda": o.lambda_, "H_test": o.h_test, "delta_vs_mle": o.delta_vs_mle,
                   "delta_vs_theta0": o.delta_vs_theta0, "converged": o.converged,
                   "jitter_used": o.jitter_used, "wall_ms": o.wall_ms, "error": o.error}


def _header(config):
    return f"config_hash={config_hash(config)} base_seed={config.base_seed} study={config.study}"


def run_compare(config):
    """Estimator comparison over ``config.grid``; returns ``(reports, summaries)``."""
    jobs = [(config, cell, rep) for cell in config.grid for rep in range(config.replications)]
    reports = _map(_compare_replication, jobs, config.parallelism)
    summaries = summarize(reports, config.estimators, config.replications)
    if config.out_dir:
        out = Path(config.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_table(out / "reports.csv", REPORT_COLUMNS, _report_rows(reports), [_header(config)])
        write_table(out / "summary.csv", SUMMARY_COLUMNS, [asdict(s) for s in summaries],
                    [_header(config), T_STAT_NOTE])
    return reports, summaries


def _converge_problem(args):
    config, k = args
    model = LogisticModel()
    p, m, _ = config.grid[0]
    seed = derive_seed(config.base_seed, "converge-problem", k)
    problem = make_problem(config.spec((p, m, min(config.train_sizes)), seed), model)
    h0 = entropy_estimate(model, problem.test, problem.theta0)
    rows = []
    for j, n in enumerate(config.train_sizes):
        train = problem.fresh_train(n, j)
        row = {"n": n, "H_theta0": h0}
        for name in ("mle", "l2", "ice"):
            try:
                fit = fit_estimator(name, model, train, derive_seed(seed, "fit", j), config.folds, config.shrink_intercept)
                row[f"delta_{name}"] = entropy_estimate(model, problem.test, fit.theta) - h0
            except Exception:
                row[f"delta_{name}"] = None
        rows.append(row)
    return rows


def run_converge(config):
    """Mean entropy error against the truth for growing training sizes."""
    per_problem = _map(_converge_problem, [(config, k) for k in range(config.problems)], config.parallelism)
    table = []
    for j, n in enumerate(config.train_sizes):
        row = {"n": n}
        for col in CONVERGE_COLUMNS[1:]:
            vals = [rows[j][col] for rows in per_problem if rows[j][col] is not None]
            row[col] = float(np.mean(vals)) if vals else None
        table.append(row)
    if config.out_dir:
        out = Path(config.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_table(out / "converge.csv", CONVERGE_COLUMNS, table, [_header(config)])
    return table


def covariance_ratio(a, b):
    """Trace ratio and per-coordinate variance ratios of two error samples."""
    ca = np.cov(a, rowvar=False, ddof=1).reshape(a.shape[1], a.shape[1])
    cb = np.cov(b, rowvar=False, ddof=1).reshape(b.shape[1], b.shape[1])
    return float(np.trace(ca) / np.trace(cb)), np.diag(ca) / np.diag(cb)


def _variance_replication(args):
    config, problem, rep = args
    model = LogisticModel()
    n = config.grid[0][2]
    train = problem.fresh_train(n, rep)
    seed = derive_seed(config.base_seed, "vr-fit", rep)
    try:
        mle = fit_estimator("mle", model, train, seed)
        ice = fit_estimator("ice", model, train, seed)
    except Exception:
        return None
    root_n = math.sqrt(n)
    return root_n * (mle.theta - problem.theta0), root_n * (ice.theta - problem.theta0)


def run_variance_ratio(config):
    """Spread of ICE versus MLE errors at a fixed truth, with bootstrap CIs."""
    model = LogisticModel()
    cell = config.grid[0]
    problem = make_problem(config.spec(cell, derive_seed(config.base_seed, "vr-problem")), model)
    results = _map(_variance_replication, [(config, problem, r) for r in range(config.replications)],
                   config.parallelism)
    ok = [r for r in results if r is not None]
    err_mle = np.array([r[0] for r in ok])
    err_ice = np.array([r[1] for r in ok])
    trace_ratio, per_coord = covariance_ratio(err_ice, err_mle)
    rng = child_rng(config.base_seed, "bootstrap")
    boot_trace = np.empty(config.bootstrap)
    boot_coord = np.empty((config.bootstrap, err_mle.shape[1]))
    for b in range(config.bootstrap):
        idx = rng.integers(0, len(ok), size=len(ok))
        boot_trace[b], boot_coord[b] = covariance_ratio(err_ice[idx], err_mle[idx])
    report = {
        "trace_ratio": trace_ratio,
        "per_coord_ratios": per_coord.tolist(),
        "ci_low": float(np.percentile(boot_trace, 2.5)),
        "ci_high": float(np.percentile(boot_trace, 97.5)),
        "per_coord_ci_low": np.percentile(boot_coord, 2.5, axis=0).tolist(),
        "per_coord_ci_high": np.percentile(boot_coord, 97.5, axis=0).tolist(),
        "reference_c": REFERENCE_C,
        "R": config.replications,
        "R_effective": len(ok),
        "seed": config.base_seed,
        "spec": config.spec(cell, 0).spec_id,
        "config_hash": config_hash(config),
    }
    if config.out_dir:
        out = Path(config.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "variance_ratio.json").write_text(json.dumps(report, indent=2) + "\n")
    return report


def run_study(config):
    if config.study == "compare":
        return run_compare(config)
    if config.study == "converge":
        return run_converge(config)
    return run_variance_ratio(config)


def with_overrides(config, **kwargs):
    kwargs = {k: v for k, v in kwargs.items() if v is not None}
    return replace(config, **kwargs)
