import numpy as np
import pytest

from wdqlab.distributions import DistributionSpec, ModelParams
from wdqlab.paths import Grid, PiecewiseLinearPath


def make_params(mu=1.0, theta=2.0, sigma_x=1.0, sigma_theta=1.0, r=0.0,
                beta=0.2, horizon=1.0, w0=0.0, deterministic=False):
    if deterministic:
        theta_law = DistributionSpec.point_mass(theta)
        x_law = DistributionSpec.point_mass(mu)
    else:
        theta_law = DistributionSpec.normal(theta, sigma_theta)
        x_law = DistributionSpec.normal(mu, sigma_x)
    return ModelParams(theta_law=theta_law, x_law_base=x_law, r=r, beta=beta,
                       horizon=horizon, w0=w0)


def random_path_w_pos(rng, grid: Grid, w0: float, scale=0.05) -> PiecewiseLinearPath:
    steps = rng.normal(0.0, scale, grid.steps)
    nodes = np.concatenate(([w0], w0 + np.cumsum(steps)))
    nodes[1:] = np.maximum(nodes[1:], 0.02)
    nodes[0] = w0
    return PiecewiseLinearPath(grid, nodes)


def random_path_w_zero(rng, grid: Grid) -> PiecewiseLinearPath:
    """Nonnegative path from 0 with exact zero segments interleaved with tents."""
    m = grid.steps
    nodes = np.zeros(m + 1)
    k = 0
    while k < m:
        run = int(rng.integers(5, max(6, m // 4)))
        if rng.random() < 0.5:
            k += run  # flat zero stretch
        else:
            height = float(rng.uniform(0.1, 1.0))
            end = min(k + run, m)
            half = (end - k) // 2
            for j in range(k, end + 1):
                if j <= k + half:
                    frac = (j - k) / max(half, 1)
                else:
                    frac = (end - j) / max(end - k - half, 1)
                nodes[j] = height * max(frac, 0.0)
            k = end
    nodes[m] = nodes[m - 1] if m >= 1 else 0.0
    nodes[0] = 0.0
    return PiecewiseLinearPath(grid, nodes)


def random_path_v(rng, grid: Grid, v0: float, scale=0.05) -> PiecewiseLinearPath:
    steps = rng.normal(0.0, scale, grid.steps)
    return PiecewiseLinearPath(grid, np.concatenate(([v0], v0 + np.cumsum(steps))))


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
