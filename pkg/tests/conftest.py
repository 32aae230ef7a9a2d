import numpy as np
import pytest

from dispflow.fields import Grid
from dispflow.initial_data import make_initial_data, random_analytic_curve
from dispflow.fields import MapState

TWO_PI = 2.0 * np.pi


def rand_curve(n, target, seed, length=TWO_PI):
    g = Grid(n, length)
    return MapState(g, 0.0, random_analytic_curve(g, target, seed), target)


def perturbed_circle(n, target="s2", amp=0.05, mode=3, length=TWO_PI):
    return make_initial_data("perturbed-circle", {"k": 1, "amp": amp, "mode": mode}, Grid(n, length), target)


def great_circle(n, target="s2", k=1, length=TWO_PI):
    return make_initial_data("great-circle", {"k": k}, Grid(n, length), target)


def random_tangent(u, seed):
    """Smooth random tangent field along u."""
    rng = np.random.default_rng(seed)
    x = u.grid.x * TWO_PI / u.grid.length
    d = u.target.ambient_dim
    W = np.zeros((u.grid.n, d))
    for k in range(1, 4):
        W += np.outer(np.cos(k * x), rng.normal(size=d)) + np.outer(np.sin(k * x), rng.normal(size=d))
    return u.target.tangent_project(u.points, W)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
