import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))


def random_sphere(rng, n):
    x = rng.standard_normal((n, 3))
    return x / np.linalg.norm(x, axis=1, keepdims=True)


def geodesic(x, v, t):
    """Point at arclength t from x along the unit tangent v."""
    return np.cos(t) * x + np.sin(t) * v


def random_tangent(rng, x):
    v = rng.standard_normal(x.shape)
    v -= np.sum(v * x, axis=-1, keepdims=True) * x
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def geodesic_fd(field, x, v, h):
    """Centered first and second differences of a field along geodesics."""
    fp = field(geodesic(x, v, h))
    f0 = field(x)
    fm = field(geodesic(x, v, -h))
    return (fp - fm) / (2.0 * h), (fp - 2.0 * f0 + fm) / h**2


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is not None and mod.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in mod.RESULTS:
            terminalreporter.write_line(line)
