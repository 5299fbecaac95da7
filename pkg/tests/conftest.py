import numpy as np
import pytest

from icereg import Dataset, LogisticModel


@pytest.fixture
def model():
    return LogisticModel()


def random_dataset(rng, n, p, scale=1.0, theta=None):
    """Logistic data with ``p`` columns including the intercept."""
    z = scale * rng.standard_normal((n, p - 1))
    x = np.column_stack([np.ones(n), z])
    theta = rng.standard_normal(p) * 0.5 if theta is None else theta
    prob = LogisticModel().prob(x, theta)
    y = (rng.random(n) < prob).astype(float)
    return Dataset(x, y)


def central_diff(f, theta, step):
    """Gradient of scalar ``f`` by central differences."""
    g = np.empty_like(theta)
    for k in range(theta.size):
        h = step * (1.0 + abs(theta[k]))
        e = np.zeros_like(theta)
        e[k] = h
        g[k] = (f(theta + e) - f(theta - e)) / (2.0 * h)
    return g


def central_jacobian(f, theta, step):
    """Jacobian of vector ``f`` by central differences; rows index outputs."""
    cols = []
    for k in range(theta.size):
        h = step * (1.0 + abs(theta[k]))
        e = np.zeros_like(theta)
        e[k] = h
        cols.append((np.asarray(f(theta + e)) - np.asarray(f(theta - e))) / (2.0 * h))
    return np.stack(cols, axis=-1)


_ACCEPTANCE = {}


@pytest.fixture
def verdict(request):
    """Record one acceptance line: ``verdict(number, passed, detail)``."""

    def record(number, passed, detail):
        line = f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}"
        _ACCEPTANCE[(str(number), request.node.name)] = line
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for key in sorted(_ACCEPTANCE):
            terminalreporter.write_line(_ACCEPTANCE[key])
