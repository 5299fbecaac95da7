"""Plain-text persistence for problems and experiment outputs.

Floats are written with ``repr`` (shortest round-trip decimal), so a
problem read back from disk is bit-identical to the one written.
"""
from __future__ import annotations

import csv
import json
import os
from pathlib import Path

import numpy as np

from .model import Dataset
from .synthetic import Problem, ProblemSpec

__all__ = ["save_problem", "load_problem", "format_value", "write_table", "read_table"]


def format_value(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def write_table(path, columns, rows, comments=()):
    """Write ``rows`` (dicts or sequences) as CSV with leading ``#`` lines."""
    with open(path, "w", newline="") as fh:
        for c in comments:
            fh.write(f"# {c}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            values = [row.get(c) for c in columns] if isinstance(row, dict) else row
            w.writerow([format_value(v) for v in values])


def read_table(path):
    """Return ``(columns, rows)`` with rows as lists of strings; skips comments."""
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    reader = csv.reader(lines)
    columns = next(reader)
    return columns, [row for row in reader]


def _write_matrix(path, header, matrix):
    write_table(path, header, np.atleast_2d(matrix).tolist())


def _read_matrix(path):
    _, rows = read_table(path)
    return np.array([[float(v) for v in row] for row in rows], dtype=float)


def _write_dataset(path, data):
    header = ["y"] + [f"x{j}" for j in range(data.p)]
    _write_matrix(path, header, np.column_stack([data.y, data.x]))


def _read_dataset(path):
    m = _read_matrix(path)
    return Dataset(m[:, 1:], m[:, 0])


def save_problem(problem, directory):
    d = Path(directory)
    os.makedirs(d, exist_ok=True)
    meta = problem.spec.to_dict()
    meta["discarded_attempts"] = problem.discarded_attempts
    meta["attempt_seed"] = problem.attempt_seed
    (d / "spec.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    _write_matrix(d / "theta0.csv", ["theta0"], problem.theta0[:, None])
    _write_matrix(d / "mu.csv", ["mu"], problem.mu[:, None])
    _write_matrix(d / "sigma.csv", [f"c{j}" for j in range(problem.sigma.shape[1])], problem.sigma)
    _write_dataset(d / "train.csv", problem.train)
    _write_dataset(d / "test.csv", problem.test)


def load_problem(directory):
    d = Path(directory)
    meta = json.loads((d / "spec.json").read_text())
    discarded = meta.pop("discarded_attempts", 0)
    attempt_seed = meta.pop("attempt_seed", meta.get("seed", 0))
    spec = ProblemSpec(**meta)
    return Problem(
        spec=spec,
        theta0=_read_matrix(d / "theta0.csv")[:, 0],
        mu=_read_matrix(d / "mu.csv")[:, 0],
        sigma=_read_matrix(d / "sigma.csv"),
        train=_read_dataset(d / "train.csv"),
        test=_read_dataset(d / "test.csv"),
        discarded_attempts=discarded,
        attempt_seed=attempt_seed,
    )
